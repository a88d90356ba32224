//! Density-ratio attack scores. Every factor is a floored table estimated
//! once on the synthetic and once on the auxiliary data; records only look
//! up cells. All arithmetic is in log space.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::marginals::{cell_indices, default_floor, ConditionalTable, MarginalTable};
use crate::recovery::ShadowWeights;
use crate::structure::{BayesStructure, StructureKey, TreeStructure};

use super::ScoreVector;

fn check_inputs(x: &Dataset, synth: &Dataset, aux: &Dataset) -> Result<()> {
    if synth.domain() != x.domain() || aux.domain() != x.domain() {
        return Err(Error::Schema("targets, synthetic and auxiliary data use different domains".into()));
    }
    if synth.is_empty() || aux.is_empty() {
        return Err(Error::Estimation("synthetic and auxiliary data must be non-empty".into()));
    }
    Ok(())
}

/// Per-record `ln μ^synth(x) − ln μ^aux(x)` for the marginal over `attrs`.
fn marginal_log_ratio(x: &Dataset, attrs: &[usize], synth: &Dataset, aux: &Dataset) -> Result<Vec<f64>> {
    let s = MarginalTable::estimate(synth, attrs)?.with_default_floor();
    let a = MarginalTable::estimate(aux, attrs)?.with_default_floor();
    let cells: Vec<f64> = s.probs().iter().zip(a.probs()).map(|(p, q)| p.ln() - q.ln()).collect();
    Ok(cell_indices(x, attrs).into_iter().map(|c| cells[c]).collect())
}

/// Per-record log ratio of the conditional of `child` given `parents`.
fn conditional_log_ratio(
    x: &Dataset,
    child: usize,
    parents: &[usize],
    synth: &Dataset,
    aux: &Dataset,
) -> Result<Vec<f64>> {
    let s = ConditionalTable::estimate(synth, child, parents, default_floor(synth.n_rows()))?;
    let a = ConditionalTable::estimate(aux, child, parents, default_floor(aux.n_rows()))?;
    let cells: Vec<f64> = s.probs().iter().zip(a.probs()).map(|(p, q)| p.ln() - q.ln()).collect();
    let mut attrs = parents.to_vec();
    attrs.push(child);
    Ok(cell_indices(x, &attrs).into_iter().map(|c| cells[c]).collect())
}

fn key_log_ratio(x: &Dataset, key: &StructureKey, synth: &Dataset, aux: &Dataset) -> Result<Vec<f64>> {
    let d = x.n_attrs();
    match key {
        StructureKey::Edge(i, j) if *i < d && *j < d => marginal_log_ratio(x, &[*i, *j], synth, aux),
        StructureKey::Node(c, ps) if *c < d && ps.iter().all(|&p| p < d) => {
            conditional_log_ratio(x, *c, ps, synth, aux)
        }
        _ => Err(Error::Bounds(format!("structure key {key} outside a {d}-attribute domain"))),
    }
}

fn one_way_log_ratios(x: &Dataset, synth: &Dataset, aux: &Dataset) -> Result<Vec<Vec<f64>>> {
    (0..x.n_attrs()).map(|i| marginal_log_ratio(x, &[i], synth, aux)).collect()
}

fn check_tree(x: &Dataset, tree: &TreeStructure) -> Result<()> {
    if tree.n_nodes() != x.n_attrs() {
        return Err(Error::Config(format!(
            "tree over {} nodes for {} attributes",
            tree.n_nodes(),
            x.n_attrs()
        )));
    }
    Ok(())
}

fn check_network(x: &Dataset, net: &BayesStructure) -> Result<()> {
    if net.n_nodes() != x.n_attrs() {
        return Err(Error::Config(format!(
            "network over {} nodes for {} attributes",
            net.n_nodes(),
            x.n_attrs()
        )));
    }
    Ok(())
}

/// `ln Σ exp(v)` that stays finite for large inputs.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Ratio of tree densities: edge ratios times node ratios raised to
/// `1 - degree`.
pub fn tamis_mst(x: &Dataset, tree: &TreeStructure, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    check_inputs(x, synth, aux)?;
    check_tree(x, tree)?;
    let mut acc = vec![0.0; x.n_rows()];
    for &(i, j) in tree.edges() {
        let lr = marginal_log_ratio(x, &[i, j], synth, aux)?;
        acc.iter_mut().zip(lr).for_each(|(a, v)| *a += v);
    }
    for (i, deg) in tree.degrees().into_iter().enumerate() {
        if deg != 1 {
            let lr = marginal_log_ratio(x, &[i], synth, aux)?;
            let e = 1.0 - deg as f64;
            acc.iter_mut().zip(lr).for_each(|(a, v)| *a += e * v);
        }
    }
    Ok(ScoreVector::new("tamis-mst", acc))
}

/// Ratio of network densities: product of conditional ratios.
pub fn tamis_pb(x: &Dataset, net: &BayesStructure, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    check_inputs(x, synth, aux)?;
    check_network(x, net)?;
    let mut acc = vec![0.0; x.n_rows()];
    for (c, ps) in net.order() {
        let lr = conditional_log_ratio(x, *c, ps, synth, aux)?;
        acc.iter_mut().zip(lr).for_each(|(a, v)| *a += v);
    }
    Ok(ScoreVector::new("tamis-pb", acc))
}

/// Weighted mean of per-key ratios, `Σ w_k r_k / Σ w_k`. Keys are tree
/// edges (2-way marginals) or (node, parents) pairs (conditionals).
pub fn weighted_ratio_mean(
    x: &Dataset,
    weights: &ShadowWeights,
    synth: &Dataset,
    aux: &Dataset,
) -> Result<Vec<f64>> {
    check_inputs(x, synth, aux)?;
    let total = weights.total();
    if total == 0 {
        return Err(Error::Parameter("shadow weights sum to zero".into()));
    }
    let mut terms: Vec<Vec<f64>> = Vec::new();
    for (key, &w) in &weights.weights {
        if w == 0 {
            continue;
        }
        let lw = (w as f64).ln();
        terms.push(key_log_ratio(x, key, synth, aux)?.into_iter().map(|v| v + lw).collect());
    }
    let norm = (total as f64).ln();
    Ok((0..x.n_rows())
        .map(|r| log_sum_exp(terms.iter().map(move |t| t[r])) - norm)
        .collect())
}

pub fn mamamia_mst(x: &Dataset, weights: &ShadowWeights, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    if weights.weights.keys().any(|k| !matches!(k, StructureKey::Edge(..))) {
        return Err(Error::Config("tree attack given network weights".into()));
    }
    Ok(ScoreVector::new("mamamia-mst", weighted_ratio_mean(x, weights, synth, aux)?))
}

pub fn mamamia_pb(x: &Dataset, weights: &ShadowWeights, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    if weights.weights.keys().any(|k| !matches!(k, StructureKey::Node(..))) {
        return Err(Error::Config("network attack given tree weights".into()));
    }
    Ok(ScoreVector::new("mamamia-pb", weighted_ratio_mean(x, weights, synth, aux)?))
}

/// Mean edge ratio over the tree: the weighted mean with indicator weights.
pub fn hybrid_mst(x: &Dataset, tree: &TreeStructure, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    check_tree(x, tree)?;
    let w = ShadowWeights::indicator(&crate::structure::Structure::Tree(tree.clone()));
    Ok(ScoreVector::new("hybrid-mst", weighted_ratio_mean(x, &w, synth, aux)?))
}

pub fn hybrid_pb(x: &Dataset, net: &BayesStructure, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    check_network(x, net)?;
    let w = ShadowWeights::indicator(&crate::structure::Structure::Bayes(net.clone()));
    Ok(ScoreVector::new("hybrid-pb", weighted_ratio_mean(x, &w, synth, aux)?))
}

/// Average of node ratios and of edge ratios divided by both endpoint
/// ratios, over the pairs yielded by `pairs`.
fn averaged_terms(
    x: &Dataset,
    pairs: &[(usize, usize)],
    synth: &Dataset,
    aux: &Dataset,
) -> Result<Vec<f64>> {
    let one = one_way_log_ratios(x, synth, aux)?;
    let mut terms: Vec<Vec<f64>> = one.clone();
    for &(i, j) in pairs {
        let lr = marginal_log_ratio(x, &[i, j], synth, aux)?;
        terms.push(
            lr.into_iter()
                .enumerate()
                .map(|(r, v)| v - one[i][r] - one[j][r])
                .collect(),
        );
    }
    let norm = (terms.len() as f64).ln();
    Ok((0..x.n_rows())
        .map(|r| log_sum_exp(terms.iter().map(move |t| t[r])) - norm)
        .collect())
}

pub fn tamis_mst_avg(x: &Dataset, tree: &TreeStructure, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    check_inputs(x, synth, aux)?;
    check_tree(x, tree)?;
    Ok(ScoreVector::new("tamis-mst-avg", averaged_terms(x, tree.edges(), synth, aux)?))
}

fn all_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
}

/// Average over all 1-way ratios and all 2-way terms of the averaged form.
pub fn marginals_sigma(x: &Dataset, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    check_inputs(x, synth, aux)?;
    let pairs = all_pairs(x.n_attrs());
    Ok(ScoreVector::new("marginals-sigma", averaged_terms(x, &pairs, synth, aux)?))
}

/// `1/(d + d(d−1)/2) · Π r_i^{2−d} · Π r_ij` over all attributes and pairs.
pub fn marginals_pi(x: &Dataset, synth: &Dataset, aux: &Dataset) -> Result<ScoreVector> {
    check_inputs(x, synth, aux)?;
    let d = x.n_attrs();
    let pairs = all_pairs(d);
    let mut acc = vec![-((d + pairs.len()) as f64).ln(); x.n_rows()];
    let e = 2.0 - d as f64;
    for lr in one_way_log_ratios(x, synth, aux)? {
        acc.iter_mut().zip(lr).for_each(|(a, v)| *a += e * v);
    }
    for (i, j) in pairs {
        let lr = marginal_log_ratio(x, &[i, j], synth, aux)?;
        acc.iter_mut().zip(lr).for_each(|(a, v)| *a += v);
    }
    Ok(ScoreVector::new("marginals-pi", acc))
}
