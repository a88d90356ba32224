//! Tree-structured generator: noisy 1-way marginals, a private maximum
//! spanning tree over dependency scores, noisy 2-way marginals on the
//! selected edges.

use serde::{Deserialize, Serialize};

use super::sampling::{sample_records, Cdf};
use super::{check_fit_inputs, FittedModel, Generator, GeneratorConfig, Method};
use crate::data::{Dataset, Domain};
use crate::dp::{
    exponential_mechanism_with, gaussian_sigma, sample_gaussian, BudgetLedger, DpParams,
};
use crate::error::{Error, Result};
use crate::marginals::{
    clip_and_normalize, default_floor, floor_distribution, MarginalTable, PairwiseMarginals,
};
use crate::rng::{rng_from_seed, Rng};
use crate::structure::{Structure, TreeStructure, UnionFind};

/// Tree graphical model: one table per node and one per edge. Edge tables
/// are aligned with `structure.edges()` and indexed `(i, j)` with `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    domain: Domain,
    structure: TreeStructure,
    node_tables: Vec<MarginalTable>,
    edge_tables: Vec<MarginalTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dp: Option<DpParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ledger: Option<BudgetLedger>,
}

impl TreeModel {
    pub fn from_tables(
        domain: Domain,
        structure: TreeStructure,
        node_tables: Vec<MarginalTable>,
        edge_tables: Vec<MarginalTable>,
    ) -> Result<Self> {
        if structure.n_nodes() != domain.len() || node_tables.len() != domain.len() {
            return Err(Error::Config("tree model does not cover the domain".into()));
        }
        for (i, t) in node_tables.iter().enumerate() {
            if t.attrs() != [i] {
                return Err(Error::Config(format!("node table {i} has attrs {:?}", t.attrs())));
            }
        }
        if edge_tables.len() != structure.edges().len() {
            return Err(Error::Config("one edge table per edge expected".into()));
        }
        for (&(i, j), t) in structure.edges().iter().zip(&edge_tables) {
            if t.attrs() != [i, j] {
                return Err(Error::Config(format!(
                    "edge table for ({i}, {j}) has attrs {:?}",
                    t.attrs()
                )));
            }
        }
        Ok(TreeModel {
            domain,
            structure,
            node_tables,
            edge_tables,
            dp: None,
            ledger: None,
        })
    }

    /// Empirical tables of `ds` over the given tree, each floored at
    /// `floor` (default: one tenth of a record).
    pub fn from_data(ds: &Dataset, structure: &TreeStructure, floor: Option<f64>) -> Result<Self> {
        let floor = floor.unwrap_or_else(|| default_floor(ds.n_rows()));
        let nodes = (0..ds.n_attrs())
            .map(|i| Ok(MarginalTable::estimate(ds, &[i])?.floored(floor)))
            .collect::<Result<_>>()?;
        let edges = structure
            .edges()
            .iter()
            .map(|&(i, j)| Ok(MarginalTable::estimate(ds, &[i, j])?.floored(floor)))
            .collect::<Result<_>>()?;
        TreeModel::from_tables(ds.domain().clone(), structure.clone(), nodes, edges)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn structure(&self) -> &TreeStructure {
        &self.structure
    }

    pub fn node_tables(&self) -> &[MarginalTable] {
        &self.node_tables
    }

    pub fn edge_tables(&self) -> &[MarginalTable] {
        &self.edge_tables
    }

    pub fn edge_table(&self, i: usize, j: usize) -> Option<&MarginalTable> {
        let key = (i.min(j), i.max(j));
        self.structure
            .edges()
            .iter()
            .position(|&e| e == key)
            .map(|k| &self.edge_tables[k])
    }

    pub fn ledger(&self) -> Option<&BudgetLedger> {
        self.ledger.as_ref()
    }

    pub fn dp(&self) -> Option<&DpParams> {
        self.dp.as_ref()
    }

    /// Log of the factorized density: edge tables in the numerator, each
    /// node table raised to `1 - degree`.
    pub fn log_density(&self, record: &[u32]) -> Result<f64> {
        if record.len() != self.domain.len() {
            return Err(Error::Bounds(format!(
                "record of length {} for a {}-attribute domain",
                record.len(),
                self.domain.len()
            )));
        }
        let mut acc = 0.0;
        for t in &self.edge_tables {
            acc += t.lookup(record)?.ln();
        }
        for (t, deg) in self.node_tables.iter().zip(self.structure.degrees()) {
            if deg != 1 {
                acc += (1.0 - deg as f64) * t.lookup(record)?.ln();
            }
        }
        Ok(acc)
    }
}

pub fn tree_density(model: &TreeModel, record: &[u32]) -> Result<f64> {
    Ok(model.log_density(record)?.exp())
}

/// Dependency score of an attribute pair given their joint table and the
/// (possibly noisy) 1-way distributions: `sum |P(a, b) - P(a) P(b)|`.
pub fn edge_score(joint: &MarginalTable, left: &[f64], right: &[f64]) -> f64 {
    let m = right.len();
    joint
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &p)| (p - left[k / m] * right[k % m]).abs())
        .sum()
}

/// Score of edge `(i, j)` on `ds`. With `noisy_1way` (one table per
/// attribute), the products use those tables instead of the exact marginals.
pub fn mst_edge_score(
    ds: &Dataset,
    i: usize,
    j: usize,
    noisy_1way: Option<&[MarginalTable]>,
) -> Result<f64> {
    if i == j {
        return Err(Error::Parameter("edge score needs two distinct attributes".into()));
    }
    let joint = MarginalTable::estimate(ds, &[i, j])?;
    let (pi, pj) = match noisy_1way {
        Some(t) => (t[i].probs().to_vec(), t[j].probs().to_vec()),
        None => (
            MarginalTable::estimate(ds, &[i])?.probs().to_vec(),
            MarginalTable::estimate(ds, &[j])?.probs().to_vec(),
        ),
    };
    Ok(edge_score(&joint, &pi, &pj))
}

/// L1 sensitivity of a normalized score under replacement of one record.
pub(crate) fn score_sensitivity(n: usize) -> f64 {
    2.0 / n as f64
}

fn noisy_distribution(
    rng: &mut Rng,
    table: &MarginalTable,
    sigma: Option<f64>,
    n: usize,
) -> Vec<f64> {
    let mut counts: Vec<f64> = table.probs().iter().map(|p| p * n as f64).collect();
    if let Some(s) = sigma {
        counts.iter_mut().for_each(|c| *c += sample_gaussian(rng, s));
    }
    if !clip_and_normalize(&mut counts) {
        let u = 1.0 / counts.len() as f64;
        counts.iter_mut().for_each(|c| *c = u);
    }
    counts
}

/// Output of the private structure selection step.
#[derive(Clone, Debug)]
pub struct TreeSelection {
    pub structure: TreeStructure,
    /// Noisy 1-way distributions measured before selection.
    pub one_way: Vec<Vec<f64>>,
    pub ledger: BudgetLedger,
    pub(crate) marginals: PairwiseMarginals,
    pub(crate) sigma_per_table: Option<f64>,
}

fn measurement_budget(cfg: &GeneratorConfig, d: usize) -> (f64, f64) {
    let tables = (2 * d - 1) as f64;
    (
        cfg.budget_split.measurement / tables,
        cfg.budget_split.measurement / tables,
    )
}

/// Measures noisy 1-way marginals, scores every pair and selects `d - 1`
/// edges one at a time with the exponential mechanism, among edges that
/// join two distinct components.
pub fn select_tree(ds: &Dataset, cfg: &GeneratorConfig, rng: &mut Rng) -> Result<TreeSelection> {
    check_fit_inputs(ds, cfg, 2)?;
    let d = ds.n_attrs();
    let n = ds.n_rows();
    let mut ledger = BudgetLedger::new(cfg.dp);
    let marginals = PairwiseMarginals::compute(ds)?;

    let (eps_share, delta_share) = measurement_budget(cfg, d);
    let sigma = if cfg.dp.is_noiseless() {
        None
    } else {
        let eps = cfg.dp.epsilon * eps_share;
        let delta = cfg.dp.delta * delta_share;
        if !(delta > 0.0) {
            return Err(Error::Parameter(
                "the Gaussian mechanism needs delta > 0".into(),
            ));
        }
        Some(gaussian_sigma(eps, delta, std::f64::consts::SQRT_2))
    };
    let mut one_way = Vec::with_capacity(d);
    for i in 0..d {
        ledger.charge(format!("measure 1-way {i}"), eps_share, delta_share, "gaussian")?;
        one_way.push(noisy_distribution(rng, &marginals.one_way[i], sigma, n));
    }

    let mut pairs = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            pairs.push((i, j, edge_score(marginals.pair(i, j), &one_way[i], &one_way[j])));
        }
    }

    let step_share = cfg.budget_split.selection / (d - 1) as f64;
    let mut uf = UnionFind::new(d);
    let mut edges = Vec::with_capacity(d - 1);
    for step in 0..d - 1 {
        let (eps, _) = ledger.charge(format!("select edge {step}"), step_share, 0.0, "exponential")?;
        let valid: Vec<&(usize, usize, f64)> = pairs
            .iter()
            .filter(|&&(i, j, _)| uf.find(i) != uf.find(j))
            .collect();
        let scores: Vec<f64> = valid.iter().map(|c| c.2).collect();
        let pick = exponential_mechanism_with(rng, &scores, eps, score_sensitivity(n))?;
        let (i, j, _) = *valid[pick];
        uf.union(i, j);
        edges.push((i, j));
    }

    Ok(TreeSelection {
        structure: TreeStructure::new(d, edges)?,
        one_way,
        ledger,
        marginals,
        sigma_per_table: sigma,
    })
}

/// Fits the tree model.
///
/// Noisy edge tables are made mutually consistent by walking the tree from
/// node 0: the root keeps its noisy 1-way table, each child gets the
/// conditional read off the noisy edge table, and edge and child tables are
/// rebuilt from those. Every distribution is floored, so the model density is
/// positive and sums to one.
pub fn fit_mst(train: &Dataset, cfg: &GeneratorConfig) -> Result<TreeModel> {
    let mut rng = rng_from_seed(cfg.dp.seed);
    let sel = select_tree(train, cfg, &mut rng)?;
    let TreeSelection {
        structure,
        one_way,
        mut ledger,
        marginals,
        sigma_per_table,
    } = sel;
    let d = train.n_attrs();
    let n = train.n_rows();
    let floor = default_floor(n);
    let (eps_share, delta_share) = measurement_budget(cfg, d);
    let cards = train.domain().cardinalities();

    let mut noisy_edges = Vec::with_capacity(d - 1);
    for &(i, j) in structure.edges() {
        ledger.charge(format!("measure 2-way {i}-{j}"), eps_share, delta_share, "gaussian")?;
        noisy_edges.push(noisy_distribution(&mut rng, marginals.pair(i, j), sigma_per_table, n));
    }

    let mut node_probs: Vec<Option<Vec<f64>>> = vec![None; d];
    let mut root = one_way[0].clone();
    floor_distribution(&mut root, floor);
    node_probs[0] = Some(root);
    let mut edge_probs: Vec<Vec<f64>> = vec![Vec::new(); d - 1];

    for (p, c) in structure.bfs_edges() {
        let k = structure
            .edges()
            .iter()
            .position(|&e| e == (p.min(c), p.max(c)))
            .expect("bfs edge belongs to the tree");
        let noisy = &noisy_edges[k];
        let (np, nc) = (cards[p], cards[c]);
        // noisy joint indexed [p][c]
        let joint_pc = |xp: usize, xc: usize| {
            if p < c {
                noisy[xp * nc + xc]
            } else {
                noisy[xc * np + xp]
            }
        };
        let parent = node_probs[p].clone().expect("parent visited first");
        let mut child = vec![0.0; nc];
        let mut table = vec![0.0; np * nc];
        for xp in 0..np {
            let mut row: Vec<f64> = (0..nc).map(|xc| joint_pc(xp, xc)).collect();
            if !clip_and_normalize(&mut row) {
                row.clone_from(&one_way[c]);
            }
            floor_distribution(&mut row, floor);
            for xc in 0..nc {
                let v = parent[xp] * row[xc];
                child[xc] += v;
                if p < c {
                    table[xp * nc + xc] = v;
                } else {
                    table[xc * np + xp] = v;
                }
            }
        }
        node_probs[c] = Some(child);
        edge_probs[k] = table;
    }

    let node_tables = node_probs
        .into_iter()
        .enumerate()
        .map(|(i, p)| MarginalTable::from_probs(vec![i], vec![cards[i]], p.expect("tree spans"), n))
        .collect::<Result<_>>()?;
    let edge_tables = structure
        .edges()
        .iter()
        .zip(edge_probs)
        .map(|(&(i, j), p)| MarginalTable::from_probs(vec![i, j], vec![cards[i], cards[j]], p, n))
        .collect::<Result<_>>()?;
    let mut model = TreeModel::from_tables(train.domain().clone(), structure, node_tables, edge_tables)?;
    debug_assert!(ledger.within_budget());
    model.dp = Some(cfg.dp);
    model.ledger = Some(ledger);
    Ok(model)
}

/// Draws `n` records: node 0 from its table, then each child given its
/// parent in breadth-first order, using the edge table row of the parent's
/// value.
pub fn sample_tree(model: &TreeModel, n: usize, seed: u64) -> Result<Dataset> {
    let cards = model.domain.cardinalities();
    let root = Cdf::new(model.node_tables[0].probs());
    let steps: Vec<(usize, usize, Vec<Cdf>)> = model
        .structure
        .bfs_edges()
        .into_iter()
        .map(|(p, c)| {
            let t = model.edge_table(p, c).expect("bfs edge");
            let (np, nc) = (cards[p], cards[c]);
            let rows = (0..np)
                .map(|xp| {
                    let row: Vec<f64> = (0..nc)
                        .map(|xc| {
                            if p < c {
                                t.probs()[xp * nc + xc]
                            } else {
                                t.probs()[xc * np + xp]
                            }
                        })
                        .collect();
                    Cdf::new(&row)
                })
                .collect();
            (p, c, rows)
        })
        .collect();
    sample_records(&model.domain, n, seed, |rng, rec| {
        rec[0] = root.draw(rng);
        for (p, c, rows) in &steps {
            rec[*c] = rows[rec[*p] as usize].draw(rng);
        }
    })
}

pub struct MstGenerator;

impl Generator for MstGenerator {
    fn name(&self) -> &'static str {
        "mst"
    }

    fn method(&self) -> Method {
        Method::Mst
    }

    fn fit(&self, train: &Dataset, cfg: &GeneratorConfig) -> Result<FittedModel> {
        fit_mst(train, cfg).map(FittedModel::Tree)
    }

    fn select_structure(&self, data: &Dataset, cfg: &GeneratorConfig) -> Result<Structure> {
        let mut rng = rng_from_seed(cfg.dp.seed);
        Ok(Structure::Tree(select_tree(data, cfg, &mut rng)?.structure))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(cards: &[usize], rows: &[Vec<u32>]) -> Dataset {
        Dataset::from_rows(Domain::from_cardinalities(cards).unwrap(), rows).unwrap()
    }

    fn cfg(eps: f64, seed: u64) -> GeneratorConfig {
        GeneratorConfig::new(Method::Mst, DpParams::new(eps, 1e-9, seed))
    }

    #[test]
    fn independent_pair_scores_zero() {
        // full product of two fair binary attributes
        let d = ds(&[2, 2], &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(mst_edge_score(&d, 0, 1, None).unwrap(), 0.0);
    }

    #[test]
    fn correlated_pair_scores_one() {
        // cells: |0.5-0.25| + |0-0.25| + |0-0.25| + |0.5-0.25| = 1
        let d = ds(&[2, 2], &[vec![0, 0], vec![1, 1]]);
        assert_eq!(mst_edge_score(&d, 0, 1, None).unwrap(), 1.0);
    }

    #[test]
    fn score_is_symmetric() {
        let d = ds(
            &[3, 2],
            &[vec![0, 0], vec![1, 1], vec![2, 1], vec![2, 0], vec![1, 1]],
        );
        let a = mst_edge_score(&d, 0, 1, None).unwrap();
        let b = mst_edge_score(&d, 1, 0, None).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(mst_edge_score(&d, 1, 1, None).is_err());
    }

    #[test]
    fn two_attributes_give_single_edge() {
        let d = ds(&[2, 3], &[vec![0, 1], vec![1, 2], vec![0, 0]]);
        for seed in 0..5 {
            let m = fit_mst(&d, &cfg(0.5, seed)).unwrap();
            assert_eq!(m.structure().edges(), &[(0, 1)]);
        }
    }

    #[test]
    fn needs_two_attributes_and_delta() {
        let d = ds(&[2], &[vec![0]]);
        assert!(matches!(fit_mst(&d, &cfg(1.0, 0)), Err(Error::Config(_))));
        let d = ds(&[2, 2], &[vec![0, 1]]);
        let mut c = cfg(1.0, 0);
        c.dp.delta = 0.0;
        assert!(matches!(fit_mst(&d, &c), Err(Error::Parameter(_))));
    }

    #[test]
    fn degenerate_domain_is_rejected() {
        let dom = Domain::new(vec![
            crate::data::Attribute { name: "a".into(), categories: vec!["x".into()] },
            crate::data::Attribute { name: "b".into(), categories: vec![] },
        ])
        .unwrap();
        let d = Dataset::from_columns(dom, vec![vec![], vec![]]).unwrap();
        assert!(matches!(fit_mst(&d, &cfg(1.0, 0)), Err(Error::Config(_))));
    }

    #[test]
    fn two_node_density_is_the_edge_table() {
        let d = ds(&[2, 3], &[vec![0, 1], vec![1, 2], vec![0, 0], vec![0, 1]]);
        let t = TreeStructure::new(2, [(0, 1)]).unwrap();
        let m = TreeModel::from_data(&d, &t, Some(0.0)).unwrap();
        let rec = [0, 1];
        let expect = m.edge_tables()[0].lookup(&rec).unwrap();
        assert!((tree_density(&m, &rec).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn path_density_divides_by_center() {
        let d = ds(
            &[2, 2, 2],
            &[vec![0, 1, 1], vec![1, 1, 0], vec![0, 0, 0], vec![1, 0, 1], vec![0, 1, 0]],
        );
        let t = TreeStructure::new(3, [(0, 1), (1, 2)]).unwrap();
        let m = TreeModel::from_data(&d, &t, Some(0.0)).unwrap();
        let x = [0, 1, 0];
        let expect = m.edge_table(0, 1).unwrap().lookup(&x).unwrap()
            * m.edge_table(1, 2).unwrap().lookup(&x).unwrap()
            / m.node_tables()[1].lookup(&x).unwrap();
        assert!((tree_density(&m, &x).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn point_mass_sampling() {
        let d = ds(&[3, 2, 4], &vec![vec![2, 1, 3]; 50]);
        let t = fit_mst(&d, &cfg(f64::INFINITY, 0)).unwrap().structure().clone();
        let m = TreeModel::from_data(&d, &t, Some(0.0)).unwrap();
        let s = sample_tree(&m, 200, 1).unwrap();
        for r in 0..200 {
            assert_eq!(s.record(r), vec![2, 1, 3]);
        }
    }

    #[test]
    fn ledger_stays_within_budget() {
        let d = ds(
            &[2, 3, 2],
            &[vec![0, 1, 1], vec![1, 2, 0], vec![0, 0, 0], vec![1, 1, 1]],
        );
        let m = fit_mst(&d, &cfg(1.0, 3)).unwrap();
        let l = m.ledger().unwrap();
        assert!(l.within_budget());
        assert!((l.epsilon_spent() - 1.0).abs() < 1e-9);
        assert_eq!(l.spent.len(), 3 + 2 + 2);
    }
}
