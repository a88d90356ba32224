//! Bayesian-network generator: greedy private choice of (node, parent set)
//! pairs under a domain-size constraint, then noisy conditional tables.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mst::score_sensitivity;
use super::sampling::{sample_records, Cdf};
use super::{check_fit_inputs, FittedModel, Generator, GeneratorConfig, Method};
use crate::data::{Dataset, Domain};
use crate::dp::{exponential_mechanism_with, laplace_scale, sample_laplace, BudgetLedger, DpParams};
use crate::error::{Error, Result};
use crate::marginals::{default_floor, ConditionalTable};
use crate::rng::{rng_from_seed, Rng};
use crate::structure::{BayesStructure, Structure};

/// How the conditional term of the network score is read.
///
/// `Joint` compares `P(l, π)` with `P(l) P(π)`, which is zero exactly under
/// independence. `Literal` compares `P(l | π)` with `P(l) P(π)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreReading {
    #[default]
    Joint,
    Literal,
}

/// `½ Σ |P(l, π) − P(l) P(π)|` over child values `l` and parent
/// configurations `π` (or the `Literal` variant). Only observed cells are
/// enumerated, so large parent domains cost nothing extra.
pub fn privbayes_score(
    ds: &Dataset,
    child: usize,
    parents: &[usize],
    reading: ScoreReading,
) -> Result<f64> {
    let d = ds.n_attrs();
    if child >= d || parents.iter().any(|&p| p >= d) {
        return Err(Error::Bounds("attribute index outside the domain".into()));
    }
    if parents.contains(&child) {
        return Err(Error::Parameter(format!("child {child} among its parents")));
    }
    if parents.is_empty() || ds.is_empty() {
        return Ok(0.0);
    }
    let n = ds.n_rows() as f64;
    let card = ds.domain().cardinality(child);
    let child_col = ds.column(child);
    let mut child_p = vec![0.0; card];
    for &v in child_col {
        child_p[v as usize] += 1.0 / n;
    }

    let mut attrs = parents.to_vec();
    attrs.push(child);
    if let Some(cells) = ds.domain().subset_size(&attrs).filter(|&c| c <= 4 * ds.n_rows()) {
        return Ok(dense_score(ds, &attrs, cells, card, &child_p, reading));
    }

    // mixed-radix code per row; u128 keeps large parent domains exact
    let mut codes: Vec<(u128, u32)> = vec![(0, 0); ds.n_rows()];
    for &p in parents {
        let c = ds.domain().cardinality(p) as u128;
        for (code, &v) in codes.iter_mut().zip(ds.column(p)) {
            code.0 = code.0 * c + v as u128;
        }
    }
    for (code, &v) in codes.iter_mut().zip(child_col) {
        code.1 = v;
    }
    codes.sort_unstable();

    let mut total = 0.0;
    let mut start = 0;
    while start < codes.len() {
        let pi = codes[start].0;
        let end = start + codes[start..].partition_point(|c| c.0 == pi);
        let n_pi = (end - start) as f64;
        let p_pi = n_pi / n;
        let mut seen_mass = 0.0;
        let mut k = start;
        while k < end {
            let l = codes[k].1;
            let run = codes[k..end].partition_point(|c| c.1 == l);
            let observed = match reading {
                ScoreReading::Joint => run as f64 / n,
                ScoreReading::Literal => run as f64 / n_pi,
            };
            let pl = child_p[l as usize];
            total += (observed - pl * p_pi).abs();
            seen_mass += pl;
            k += run;
        }
        total += p_pi * (1.0 - seen_mass).max(0.0);
        start = end;
    }
    Ok(0.5 * total)
}

/// Score from a full count table laid out as `[parent config][child]`.
fn dense_score(
    ds: &Dataset,
    attrs: &[usize],
    cells: usize,
    card: usize,
    child_p: &[f64],
    reading: ScoreReading,
) -> f64 {
    let n = ds.n_rows() as f64;
    let mut counts = vec![0u32; cells];
    for c in crate::marginals::cell_indices(ds, attrs) {
        counts[c] += 1;
    }
    let mut total = 0.0;
    for row in counts.chunks(card) {
        let n_pi: u32 = row.iter().sum();
        if n_pi == 0 {
            continue;
        }
        let p_pi = n_pi as f64 / n;
        for (&c, &pl) in row.iter().zip(child_p) {
            let observed = match reading {
                ScoreReading::Joint => c as f64 / n,
                ScoreReading::Literal => c as f64 / n_pi as f64,
            };
            total += (observed - pl * p_pi).abs();
        }
    }
    0.5 * total
}

/// Result of the greedy network search.
#[derive(Clone, Debug)]
pub struct NetworkSelection {
    pub structure: BayesStructure,
    /// Largest admissible `|X_i| · |X_Π|`; `None` when unbounded.
    pub threshold: Option<f64>,
    pub ledger: BudgetLedger,
}

fn domain_threshold(cfg: &GeneratorConfig, n: usize) -> Option<f64> {
    if cfg.dp.is_noiseless() {
        return None;
    }
    let theta = cfg.dp.theta.unwrap_or(4.0 / n as f64);
    Some(theta * cfg.dp.epsilon * n as f64)
}

fn admissible(domain: &Domain, child: usize, parents: &[usize], threshold: Option<f64>) -> bool {
    if parents.is_empty() {
        return true;
    }
    let mut attrs = parents.to_vec();
    attrs.push(child);
    match (domain.subset_size(&attrs), threshold) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(size), Some(t)) => size as f64 <= t,
    }
}

/// Subsets of `items` of size at most `max`, by size then lexicographically.
fn subsets(items: &[usize], max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut level = vec![Vec::new()];
    for _ in 0..max.min(items.len()) {
        let mut next = Vec::new();
        for s in &level {
            let from = s.last().map_or(0, |&last: &usize| {
                items.iter().position(|&x| x == last).unwrap() + 1
            });
            for &x in &items[from..] {
                let mut t = s.clone();
                t.push(x);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// Greedy private search. The first node is drawn uniformly and gets no
/// parents; each later step draws one admissible (unplaced node, subset of
/// placed nodes) pair with the exponential mechanism on the network score.
pub fn select_network(ds: &Dataset, cfg: &GeneratorConfig, rng: &mut Rng) -> Result<NetworkSelection> {
    check_fit_inputs(ds, cfg, 1)?;
    let d = ds.n_attrs();
    let n = ds.n_rows();
    let threshold = domain_threshold(cfg, n);
    let max_parents = cfg.max_parents.unwrap_or(d);
    let mut ledger = BudgetLedger::new(cfg.dp);
    let mut cache: HashMap<(usize, Vec<usize>), f64> = HashMap::new();

    let first = rng.random_range(0..d);
    let mut order = vec![(first, Vec::new())];
    let mut placed = vec![first];
    let step_share = if d > 1 { cfg.budget_split.selection / (d - 1) as f64 } else { 0.0 };

    for step in 1..d {
        let (eps, _) = ledger.charge(format!("select node {step}"), step_share, 0.0, "exponential")?;
        let mut sorted_placed = placed.clone();
        sorted_placed.sort_unstable();
        let parent_sets = subsets(&sorted_placed, max_parents);
        let mut candidates = Vec::new();
        let mut scores = Vec::new();
        for child in (0..d).filter(|c| !placed.contains(c)) {
            for ps in &parent_sets {
                if !admissible(ds.domain(), child, ps, threshold) {
                    continue;
                }
                let key = (child, ps.clone());
                let s = match cache.get(&key) {
                    Some(&s) => s,
                    None => {
                        let s = privbayes_score(ds, child, ps, cfg.score_reading)?;
                        cache.insert(key, s);
                        s
                    }
                };
                candidates.push((child, ps.clone()));
                scores.push(s);
            }
        }
        if candidates.is_empty() {
            return Err(Error::Config("no admissible candidate".into()));
        }
        let pick = exponential_mechanism_with(rng, &scores, eps, score_sensitivity(n))?;
        let (child, ps) = candidates.swap_remove(pick);
        placed.push(child);
        order.push((child, ps));
    }
    Ok(NetworkSelection {
        structure: BayesStructure::new(order)?,
        threshold,
        ledger,
    })
}

/// Bayesian network with one conditional table per node, aligned with the
/// topological order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesNetModel {
    domain: Domain,
    structure: BayesStructure,
    tables: Vec<ConditionalTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dp: Option<DpParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ledger: Option<BudgetLedger>,
}

impl BayesNetModel {
    pub fn from_tables(
        domain: Domain,
        structure: BayesStructure,
        tables: Vec<ConditionalTable>,
    ) -> Result<Self> {
        if structure.n_nodes() != domain.len() || tables.len() != domain.len() {
            return Err(Error::Config("network does not cover the domain".into()));
        }
        for ((child, parents), t) in structure.order().iter().zip(&tables) {
            if t.child() != *child || t.parents() != parents.as_slice() {
                return Err(Error::Config(format!("table mismatch for node {child}")));
            }
        }
        Ok(BayesNetModel {
            domain,
            structure,
            tables,
            threshold: None,
            dp: None,
            ledger: None,
        })
    }

    /// Empirical conditionals of `ds` over the given network, floored at
    /// `floor` (default: one tenth of a record).
    pub fn from_data(ds: &Dataset, structure: &BayesStructure, floor: Option<f64>) -> Result<Self> {
        let floor = floor.unwrap_or_else(|| default_floor(ds.n_rows()));
        let tables = structure
            .order()
            .iter()
            .map(|(c, ps)| ConditionalTable::estimate(ds, *c, ps, floor))
            .collect::<Result<_>>()?;
        BayesNetModel::from_tables(ds.domain().clone(), structure.clone(), tables)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn structure(&self) -> &BayesStructure {
        &self.structure
    }

    pub fn tables(&self) -> &[ConditionalTable] {
        &self.tables
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn dp(&self) -> Option<&DpParams> {
        self.dp.as_ref()
    }

    pub fn ledger(&self) -> Option<&BudgetLedger> {
        self.ledger.as_ref()
    }

    pub fn log_density(&self, record: &[u32]) -> Result<f64> {
        if record.len() != self.domain.len() {
            return Err(Error::Bounds(format!(
                "record of length {} for a {}-attribute domain",
                record.len(),
                self.domain.len()
            )));
        }
        self.tables
            .iter()
            .map(|t| t.lookup(record).map(f64::ln))
            .sum()
    }
}

pub fn bayes_density(model: &BayesNetModel, record: &[u32]) -> Result<f64> {
    Ok(model.log_density(record)?.exp())
}

/// Fits the network: private selection, then Laplace-noised joint counts
/// for every (node, parent set), turned into floored conditionals.
pub fn fit_privbayes(train: &Dataset, cfg: &GeneratorConfig) -> Result<BayesNetModel> {
    let mut rng = rng_from_seed(cfg.dp.seed);
    let NetworkSelection {
        structure,
        threshold,
        mut ledger,
    } = select_network(train, cfg, &mut rng)?;
    let d = train.n_attrs();
    let n = train.n_rows();
    let share = cfg.budget_split.measurement / d as f64;
    let floor = default_floor(n);
    let mut tables = Vec::with_capacity(d);
    for (child, parents) in structure.order() {
        let (eps, _) = ledger.charge(format!("measure {child}"), share, 0.0, "laplace")?;
        let exact = ConditionalTable::estimate(train, *child, parents, 0.0)?;
        // joint counts [parent config][child], rebuilt from the exact table
        let mut counts = parent_counts(train, parents)
            .into_iter()
            .zip(exact.probs().chunks(exact.child_cardinality()))
            .flat_map(|(c, row)| row.iter().map(move |p| p * c as f64).collect::<Vec<_>>())
            .collect::<Vec<f64>>();
        if !cfg.dp.is_noiseless() {
            let scale = laplace_scale(eps, 2.0);
            counts.iter_mut().for_each(|c| *c += sample_laplace(&mut rng, scale));
        }
        let mut t = ConditionalTable::from_joint_counts(train.domain(), *child, parents, counts, n)?;
        t.apply_floor(floor);
        tables.push(t);
    }
    let mut model = BayesNetModel::from_tables(train.domain().clone(), structure, tables)?;
    model.threshold = threshold;
    model.dp = Some(cfg.dp);
    model.ledger = Some(ledger);
    Ok(model)
}

fn parent_counts(ds: &Dataset, parents: &[usize]) -> Vec<u64> {
    let size = ds.domain().subset_size(parents).unwrap_or(1);
    let mut counts = vec![0u64; size];
    for i in crate::marginals::cell_indices(ds, parents) {
        counts[i] += 1;
    }
    counts
}

/// Draws `n` records node by node in topological order.
pub fn sample_bayes(model: &BayesNetModel, n: usize, seed: u64) -> Result<Dataset> {
    let cdfs: Vec<Vec<Cdf>> = model
        .tables
        .iter()
        .map(|t| (0..t.n_parent_configs()).map(|c| Cdf::new(t.row(c))).collect())
        .collect();
    sample_records(&model.domain, n, seed, |rng, rec| {
        for (t, rows) in model.tables.iter().zip(&cdfs) {
            let config = t.parent_config(rec).expect("parents precede child");
            rec[t.child()] = rows[config].draw(rng);
        }
    })
}

pub struct PrivBayesGenerator;

impl Generator for PrivBayesGenerator {
    fn name(&self) -> &'static str {
        "privbayes"
    }

    fn method(&self) -> Method {
        Method::PrivBayes
    }

    fn fit(&self, train: &Dataset, cfg: &GeneratorConfig) -> Result<FittedModel> {
        fit_privbayes(train, cfg).map(FittedModel::Bayes)
    }

    fn select_structure(&self, data: &Dataset, cfg: &GeneratorConfig) -> Result<Structure> {
        let mut rng = rng_from_seed(cfg.dp.seed);
        Ok(Structure::Bayes(select_network(data, cfg, &mut rng)?.structure))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(cards: &[usize], rows: &[Vec<u32>]) -> Dataset {
        Dataset::from_rows(Domain::from_cardinalities(cards).unwrap(), rows).unwrap()
    }

    fn cfg(eps: f64, seed: u64) -> GeneratorConfig {
        GeneratorConfig::new(Method::PrivBayes, DpParams::new(eps, 0.0, seed))
    }

    /// Dense reference: enumerate every (parent config, child value) cell.
    fn dense_score_ref(ds: &Dataset, child: usize, parents: &[usize], reading: ScoreReading) -> f64 {
        let mut attrs = parents.to_vec();
        attrs.push(child);
        let joint = crate::marginals::MarginalTable::estimate(ds, &attrs).unwrap();
        let pc = crate::marginals::MarginalTable::estimate(ds, &[child]).unwrap();
        let pp = crate::marginals::MarginalTable::estimate(ds, parents).unwrap();
        let k = pc.probs().len();
        let mut s = 0.0;
        for (cell, &pj) in joint.probs().iter().enumerate() {
            let (pi, l) = (cell / k, cell % k);
            let ppi = pp.probs()[pi];
            let observed = match reading {
                ScoreReading::Joint => pj,
                ScoreReading::Literal if ppi > 0.0 => pj / ppi,
                ScoreReading::Literal => 0.0,
            };
            s += (observed - pc.probs()[l] * ppi).abs();
        }
        0.5 * s
    }

    #[test]
    fn score_examples() {
        let fair = ds(&[2, 2], &[vec![0, 0], vec![1, 1]]);
        assert_eq!(privbayes_score(&fair, 0, &[1], ScoreReading::Joint).unwrap(), 0.5);
        assert_eq!(privbayes_score(&fair, 0, &[], ScoreReading::Joint).unwrap(), 0.0);
        let indep = ds(&[2, 2], &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(privbayes_score(&indep, 1, &[0], ScoreReading::Joint).unwrap(), 0.0);
        assert!(privbayes_score(&indep, 1, &[1], ScoreReading::Joint).is_err());
    }

    #[test]
    fn sparse_score_matches_dense() {
        let mut rng = rng_from_seed(5);
        let rows: Vec<Vec<u32>> = (0..200)
            .map(|_| {
                let a = rng.random_range(0..3);
                vec![a, (a + rng.random_range(0..2)) % 4, rng.random_range(0..2), rng.random_range(0..5)]
            })
            .collect();
        let d = ds(&[3, 4, 2, 5], &rows);
        // 200 rows: the three-parent table (120 cells) is counted densely,
        // wider ones go through the sorted path
        let wide = ds(&[30, 40, 2, 5], &rows);
        for reading in [ScoreReading::Joint, ScoreReading::Literal] {
            let a = privbayes_score(&wide, 3, &[0, 1, 2], reading).unwrap();
            assert!((a - dense_score_ref(&wide, 3, &[0, 1, 2], reading)).abs() < 1e-12);
        }
        for reading in [ScoreReading::Joint, ScoreReading::Literal] {
            for (c, ps) in [(1, vec![0]), (0, vec![1, 2]), (3, vec![0, 1, 2]), (2, vec![3])] {
                let a = privbayes_score(&d, c, &ps, reading).unwrap();
                let b = dense_score_ref(&d, c, &ps, reading);
                assert!((a - b).abs() < 1e-12, "{c} {ps:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn subsets_are_ordered() {
        assert_eq!(
            subsets(&[1, 3, 4], 2),
            vec![vec![], vec![1], vec![3], vec![4], vec![1, 3], vec![1, 4], vec![3, 4]]
        );
        assert_eq!(subsets(&[2], 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn single_attribute() {
        let d = ds(&[3], &[vec![0], vec![2], vec![2]]);
        let m = fit_privbayes(&d, &cfg(1.0, 0)).unwrap();
        assert_eq!(m.structure().order(), &[(0, vec![])]);
        assert_eq!(m.tables()[0].n_parent_configs(), 1);
    }

    #[test]
    fn empty_parents_density_is_product() {
        let d = ds(&[2, 3], &[vec![0, 1], vec![1, 2], vec![0, 0], vec![0, 1]]);
        let s = BayesStructure::new(vec![(1, vec![]), (0, vec![])]).unwrap();
        let m = BayesNetModel::from_data(&d, &s, Some(0.0)).unwrap();
        let x = [0, 1];
        assert!((bayes_density(&m, &x).unwrap() - 0.75 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn threshold_limits_parent_domains() {
        let rows: Vec<Vec<u32>> = (0..100u32).map(|i| vec![i % 4, i % 4, (i / 4) % 4]).collect();
        let d = ds(&[4, 4, 4], &rows);
        let mut c = cfg(1.0, 0);
        c.dp.theta = Some(0.16); // bound 16: one parent at most
        for seed in 0..20 {
            c.dp.seed = seed;
            let m = fit_privbayes(&d, &c).unwrap();
            assert!(m.structure().order().iter().all(|(_, ps)| ps.len() <= 1));
            assert_eq!(m.threshold(), Some(16.0));
        }
    }

    #[test]
    fn ledger_spends_the_budget() {
        let rows: Vec<Vec<u32>> = (0..50u32).map(|i| vec![i % 2, i % 3, i % 2]).collect();
        let d = ds(&[2, 3, 2], &rows);
        let m = fit_privbayes(&d, &cfg(2.0, 1)).unwrap();
        let l = m.ledger().unwrap();
        assert_eq!(l.spent.len(), 2 + 3);
        assert!((l.epsilon_spent() - 1.0).abs() < 1e-9);
    }
}
