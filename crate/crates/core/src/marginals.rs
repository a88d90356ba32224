//! Contingency-table kernels: empirical marginal and conditional
//! probability tables over attribute subsets, with flooring of
//! zero-probability cells.
//!
//! Tables are dense, row-major over their attributes (first attribute most
//! significant). A conditional table stores one distribution over the child
//! per parent configuration.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Domain};
use crate::error::{Error, Result};

/// Largest dense table we agree to allocate.
pub const MAX_TABLE_CELLS: usize = 100_000_000;

/// Default probability given to unseen cells of a table estimated from
/// `source_size` records.
pub fn default_floor(source_size: usize) -> f64 {
    1.0 / (10.0 * source_size.max(1) as f64)
}

fn table_shape(domain: &Domain, attrs: &[usize]) -> Result<(Vec<usize>, usize)> {
    for (k, &a) in attrs.iter().enumerate() {
        if a >= domain.len() {
            return Err(Error::Bounds(format!(
                "attribute {a} outside a domain of {} attributes",
                domain.len()
            )));
        }
        if attrs[..k].contains(&a) {
            return Err(Error::Parameter(format!("attribute {a} repeated in table")));
        }
    }
    let shape: Vec<usize> = attrs.iter().map(|&a| domain.cardinality(a)).collect();
    let cells = domain
        .subset_size(attrs)
        .filter(|&c| c <= MAX_TABLE_CELLS)
        .ok_or_else(|| {
            Error::Parameter(format!(
                "table over {attrs:?} exceeds {MAX_TABLE_CELLS} cells"
            ))
        })?;
    Ok((shape, cells))
}

/// Flat cell index of every row of `ds` projected on `attrs`.
pub(crate) fn cell_indices(ds: &Dataset, attrs: &[usize]) -> Vec<usize> {
    let mut idx = vec![0usize; ds.n_rows()];
    for &a in attrs {
        let card = ds.domain().cardinality(a);
        for (i, &v) in idx.iter_mut().zip(ds.column(a)) {
            *i = *i * card + v as usize;
        }
    }
    idx
}

fn count_cells(ds: &Dataset, attrs: &[usize], cells: usize) -> Vec<u64> {
    let mut counts = vec![0u64; cells];
    for i in cell_indices(ds, attrs) {
        counts[i] += 1;
    }
    counts
}

fn index_in(shape: &[usize], values: impl Iterator<Item = u32>) -> Result<usize> {
    let mut idx = 0usize;
    for (&n, v) in shape.iter().zip(values) {
        if v as usize >= n {
            return Err(Error::Bounds(format!("value {v} outside cardinality {n}")));
        }
        idx = idx * n + v as usize;
    }
    Ok(idx)
}

fn project<'a>(record: &'a [u32], attrs: &'a [usize]) -> Result<impl Iterator<Item = u32> + 'a> {
    if let Some(&a) = attrs.iter().find(|&&a| a >= record.len()) {
        return Err(Error::Bounds(format!(
            "record of length {} has no attribute {a}",
            record.len()
        )));
    }
    Ok(attrs.iter().map(move |&a| record[a]))
}

/// Rescales `p` into a distribution whose cells are all at least `floor`
/// (capped at the uniform value). Cells below the floor are lifted to it and
/// the remaining mass is shared proportionally among the other cells. A
/// distribution with no mass becomes uniform.
pub fn floor_distribution(p: &mut [f64], floor: f64) {
    let k = p.len();
    if k == 0 {
        return;
    }
    let uniform = 1.0 / k as f64;
    let f = floor.clamp(0.0, uniform);
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        p.iter_mut().for_each(|x| *x = uniform);
        return;
    }
    p.iter_mut().for_each(|x| *x = x.max(0.0) / total);

    let mut fixed: Vec<bool> = p.iter().map(|&x| x < f).collect();
    loop {
        let m = fixed.iter().filter(|&&b| b).count();
        let rest: f64 = p.iter().zip(&fixed).filter(|(_, &b)| !b).map(|(x, _)| x).sum();
        if m == k || !(rest > 0.0) {
            p.iter_mut().for_each(|x| *x = uniform);
            return;
        }
        let scale = (1.0 - m as f64 * f) / rest;
        let mut changed = false;
        for (x, b) in p.iter().zip(fixed.iter_mut()) {
            if !*b && x * scale < f {
                *b = true;
                changed = true;
            }
        }
        if !changed {
            for (x, b) in p.iter_mut().zip(&fixed) {
                *x = if *b { f } else { *x * scale };
            }
            return;
        }
    }
}

/// Clips negative entries to zero and rescales to a distribution. Returns
/// false (leaving `p` all zero) when no positive mass remains.
pub fn clip_and_normalize(p: &mut [f64]) -> bool {
    p.iter_mut().for_each(|x| {
        if !(*x > 0.0) {
            *x = 0.0
        }
    });
    let total: f64 = p.iter().sum();
    if total > 0.0 && total.is_finite() {
        p.iter_mut().for_each(|x| *x /= total);
        true
    } else {
        p.iter_mut().for_each(|x| *x = 0.0);
        false
    }
}

/// Probability table over an ordered tuple of attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    attrs: Vec<usize>,
    shape: Vec<usize>,
    probs: Vec<f64>,
    source_size: usize,
}

impl MarginalTable {
    /// Empirical marginal of `ds` over `attrs`.
    pub fn estimate(ds: &Dataset, attrs: &[usize]) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Estimation("empty dataset".into()));
        }
        let (shape, cells) = table_shape(ds.domain(), attrs)?;
        let n = ds.n_rows() as f64;
        let probs = count_cells(ds, attrs, cells)
            .into_iter()
            .map(|c| c as f64 / n)
            .collect();
        Ok(MarginalTable {
            attrs: attrs.to_vec(),
            shape,
            probs,
            source_size: ds.n_rows(),
        })
    }

    pub fn from_probs(
        attrs: Vec<usize>,
        shape: Vec<usize>,
        probs: Vec<f64>,
        source_size: usize,
    ) -> Result<Self> {
        if attrs.len() != shape.len() {
            return Err(Error::Parameter("attrs and shape lengths differ".into()));
        }
        let cells: usize = shape.iter().product();
        if probs.len() != cells {
            return Err(Error::Parameter(format!(
                "{} probabilities for {cells} cells",
                probs.len()
            )));
        }
        Ok(MarginalTable {
            attrs,
            shape,
            probs,
            source_size,
        })
    }

    pub fn attrs(&self) -> &[usize] {
        &self.attrs
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    /// Copy with every cell at least `floor`, renormalized.
    pub fn floored(&self, floor: f64) -> Self {
        let mut t = self.clone();
        floor_distribution(&mut t.probs, floor);
        t
    }

    /// Copy floored at [`default_floor`] of its source size.
    pub fn with_default_floor(&self) -> Self {
        self.floored(default_floor(self.source_size))
    }

    /// Index of the cell given the values of this table's attributes, in order.
    pub fn cell_index(&self, values: &[u32]) -> Result<usize> {
        if values.len() != self.shape.len() {
            return Err(Error::Bounds(format!(
                "{} values for a {}-way table",
                values.len(),
                self.shape.len()
            )));
        }
        index_in(&self.shape, values.iter().copied())
    }

    /// Probability of the record's projection on this table's attributes.
    pub fn lookup(&self, record: &[u32]) -> Result<f64> {
        let idx = index_in(&self.shape, project(record, &self.attrs)?)?;
        Ok(self.probs[idx])
    }

    /// Sums out every attribute not in `keep`; `keep` gives the order of the
    /// result's axes and must be a subset of this table's attributes.
    pub fn project(&self, keep: &[usize]) -> Result<Self> {
        let pos: Vec<usize> = keep
            .iter()
            .map(|a| {
                self.attrs
                    .iter()
                    .position(|b| b == a)
                    .ok_or_else(|| Error::Parameter(format!("attribute {a} not in table")))
            })
            .collect::<Result<_>>()?;
        let shape: Vec<usize> = pos.iter().map(|&p| self.shape[p]).collect();
        let mut out = vec![0.0; shape.iter().product()];
        let mut digits = vec![0usize; self.shape.len()];
        for &p in &self.probs {
            let idx = pos.iter().fold(0, |acc, &q| acc * self.shape[q] + digits[q]);
            out[idx] += p;
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < self.shape[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
        Ok(MarginalTable {
            attrs: keep.to_vec(),
            shape,
            probs: out,
            source_size: self.source_size,
        })
    }
}

/// Distribution of a child attribute for every configuration of its parents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    child: usize,
    parents: Vec<usize>,
    child_card: usize,
    parent_shape: Vec<usize>,
    probs: Vec<f64>,
    source_size: usize,
}

impl ConditionalTable {
    /// Empirical conditional of `child` given `parents`, floored at `floor`
    /// per parent configuration. Unseen configurations become uniform.
    pub fn estimate(ds: &Dataset, child: usize, parents: &[usize], floor: f64) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Estimation("empty dataset".into()));
        }
        if parents.contains(&child) {
            return Err(Error::Parameter(format!("child {child} among its parents")));
        }
        let mut attrs = parents.to_vec();
        attrs.push(child);
        let (_, cells) = table_shape(ds.domain(), &attrs)?;
        let counts: Vec<f64> = count_cells(ds, &attrs, cells)
            .into_iter()
            .map(|c| c as f64)
            .collect();
        let mut t = Self::from_joint_counts(ds.domain(), child, parents, counts, ds.n_rows())?;
        t.apply_floor(floor);
        Ok(t)
    }

    /// Builds the table from (possibly noisy) joint counts laid out as
    /// `[parent configuration][child value]`. Negative counts are clipped;
    /// configurations without mass are left uniform. No flooring is applied.
    pub fn from_joint_counts(
        domain: &Domain,
        child: usize,
        parents: &[usize],
        mut counts: Vec<f64>,
        source_size: usize,
    ) -> Result<Self> {
        let mut attrs = parents.to_vec();
        attrs.push(child);
        let (shape, cells) = table_shape(domain, &attrs)?;
        if counts.len() != cells {
            return Err(Error::Parameter(format!(
                "{} counts for {cells} cells",
                counts.len()
            )));
        }
        let child_card = domain.cardinality(child);
        for row in counts.chunks_mut(child_card) {
            if !clip_and_normalize(row) {
                row.iter_mut().for_each(|x| *x = 1.0 / child_card as f64);
            }
        }
        Ok(ConditionalTable {
            child,
            parents: parents.to_vec(),
            child_card,
            parent_shape: shape[..parents.len()].to_vec(),
            probs: counts,
            source_size,
        })
    }

    pub(crate) fn apply_floor(&mut self, floor: f64) {
        for row in self.probs.chunks_mut(self.child_card) {
            floor_distribution(row, floor);
        }
    }

    pub fn floored(&self, floor: f64) -> Self {
        let mut t = self.clone();
        t.apply_floor(floor);
        t
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn child_cardinality(&self) -> usize {
        self.child_card
    }

    pub fn parent_shape(&self) -> &[usize] {
        &self.parent_shape
    }

    pub fn n_parent_configs(&self) -> usize {
        self.parent_shape.iter().product()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    /// Distribution of the child for parent configuration `config`.
    pub fn row(&self, config: usize) -> &[f64] {
        &self.probs[config * self.child_card..(config + 1) * self.child_card]
    }

    pub fn parent_config(&self, record: &[u32]) -> Result<usize> {
        index_in(&self.parent_shape, project(record, &self.parents)?)
    }

    /// P(child = record[child] | parents = record[parents]).
    pub fn lookup(&self, record: &[u32]) -> Result<f64> {
        let config = self.parent_config(record)?;
        let v = *record
            .get(self.child)
            .ok_or_else(|| Error::Bounds(format!("record has no attribute {}", self.child)))?;
        if v as usize >= self.child_card {
            return Err(Error::Bounds(format!(
                "value {v} outside cardinality {}",
                self.child_card
            )));
        }
        Ok(self.row(config)[v as usize])
    }
}

/// Anything that assigns a probability to (the projection of) a record.
pub trait ProbabilityTable {
    fn lookup(&self, record: &[u32]) -> Result<f64>;
}

impl ProbabilityTable for MarginalTable {
    fn lookup(&self, record: &[u32]) -> Result<f64> {
        MarginalTable::lookup(self, record)
    }
}

impl ProbabilityTable for ConditionalTable {
    fn lookup(&self, record: &[u32]) -> Result<f64> {
        ConditionalTable::lookup(self, record)
    }
}

/// All 1-way and 2-way empirical marginals of a dataset, counted in a single
/// pass over its rows.
#[derive(Clone, Debug)]
pub struct PairwiseMarginals {
    pub one_way: Vec<MarginalTable>,
    /// Indexed by [`pair_index`].
    pub two_way: Vec<MarginalTable>,
    pub rows_scanned: usize,
    pub passes: usize,
}

/// Position of the pair `(i, j)`, `i < j`, in lexicographic pair order.
pub fn pair_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

impl PairwiseMarginals {
    pub fn compute(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Estimation("empty dataset".into()));
        }
        let d = ds.n_attrs();
        let cards = ds.domain().cardinalities();
        let mut one: Vec<Vec<u64>> = cards.iter().map(|&n| vec![0; n]).collect();
        let mut two: Vec<Vec<u64>> = Vec::with_capacity(d * d.saturating_sub(1) / 2);
        for i in 0..d {
            for j in i + 1..d {
                two.push(vec![0; cards[i] * cards[j]]);
            }
        }
        let mut rec = vec![0u32; d];
        for r in 0..ds.n_rows() {
            for (a, v) in rec.iter_mut().enumerate() {
                *v = ds.value(r, a);
            }
            let mut p = 0;
            for i in 0..d {
                one[i][rec[i] as usize] += 1;
                let base = rec[i] as usize;
                for j in i + 1..d {
                    two[p][base * cards[j] + rec[j] as usize] += 1;
                    p += 1;
                }
            }
        }
        let n = ds.n_rows() as f64;
        let to_probs = |c: Vec<u64>| c.into_iter().map(|x| x as f64 / n).collect::<Vec<_>>();
        let one_way = one
            .into_iter()
            .enumerate()
            .map(|(i, c)| MarginalTable {
                attrs: vec![i],
                shape: vec![cards[i]],
                probs: to_probs(c),
                source_size: ds.n_rows(),
            })
            .collect();
        let mut two_way = Vec::with_capacity(two.len());
        let mut it = two.into_iter();
        for i in 0..d {
            for j in i + 1..d {
                two_way.push(MarginalTable {
                    attrs: vec![i, j],
                    shape: vec![cards[i], cards[j]],
                    probs: to_probs(it.next().expect("pair count")),
                    source_size: ds.n_rows(),
                });
            }
        }
        Ok(PairwiseMarginals {
            one_way,
            two_way,
            rows_scanned: ds.n_rows(),
            passes: 1,
        })
    }

    pub fn pair(&self, i: usize, j: usize) -> &MarginalTable {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        &self.two_way[pair_index(self.one_way.len(), a, b)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;

    fn ds(cards: &[usize], rows: &[Vec<u32>]) -> Dataset {
        Dataset::from_rows(Domain::from_cardinalities(cards).unwrap(), rows).unwrap()
    }

    #[test]
    fn uniform_one_way() {
        let d = ds(&[2], &[vec![0], vec![0], vec![1], vec![1]]);
        assert_eq!(MarginalTable::estimate(&d, &[0]).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn correlated_pair_is_diagonal() {
        let d = ds(&[2, 2], &[vec![0, 0], vec![1, 1], vec![0, 0], vec![1, 1]]);
        let t = MarginalTable::estimate(&d, &[0, 1]).unwrap();
        assert_eq!(t.probs(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn three_value_column() {
        // counts 1, 2, 1 over 4 rows
        let d = ds(&[3], &[vec![0], vec![1], vec![1], vec![2]]);
        assert_eq!(
            MarginalTable::estimate(&d, &[0]).unwrap().probs(),
            &[0.25, 0.5, 0.25]
        );
    }

    #[test]
    fn empty_dataset_cannot_be_estimated() {
        let d = ds(&[2], &[]);
        assert!(matches!(
            MarginalTable::estimate(&d, &[0]),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn unseen_parent_configuration_is_uniform() {
        let d = ds(&[3, 2], &[vec![0, 1], vec![0, 0], vec![1, 1]]);
        let t = ConditionalTable::estimate(&d, 1, &[0], default_floor(3)).unwrap();
        assert_eq!(t.row(2), &[0.5, 0.5]);
    }

    #[test]
    fn empty_parents_equal_one_way() {
        let d = ds(&[3], &[vec![0], vec![1], vec![1], vec![2]]);
        let c = ConditionalTable::estimate(&d, 0, &[], 0.0).unwrap();
        assert_eq!(c.probs(), MarginalTable::estimate(&d, &[0]).unwrap().probs());
    }

    #[test]
    fn point_mass_lookup() {
        let d = ds(&[2, 3], &vec![vec![1, 2]; 5]);
        let t = MarginalTable::estimate(&d, &[0, 1]).unwrap();
        assert_eq!(t.lookup(&[1, 2]).unwrap(), 1.0);
        assert_eq!(t.lookup(&[0, 2]).unwrap(), 0.0);
    }

    #[test]
    fn lookup_matches_hand_counts() {
        // 5 rows; (x0, x2) = (1, 0) appears twice.
        let d = ds(
            &[2, 2, 2],
            &[
                vec![1, 0, 0],
                vec![1, 1, 0],
                vec![0, 1, 1],
                vec![1, 1, 1],
                vec![0, 0, 0],
            ],
        );
        let t = MarginalTable::estimate(&d, &[0, 2]).unwrap();
        assert!((t.lookup(&[1, 1, 0]).unwrap() - 2.0 / 5.0).abs() < 1e-15);
        let c = ConditionalTable::estimate(&d, 1, &[0], 0.0).unwrap();
        // P(x1 = 1 | x0 = 1) = 2/3
        assert!((c.lookup(&[1, 1, 0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_domain_lookup() {
        let d = ds(&[2], &[vec![0]]);
        let t = MarginalTable::estimate(&d, &[0]).unwrap();
        assert!(matches!(t.lookup(&[2]), Err(Error::Bounds(_))));
        assert!(matches!(t.lookup(&[]), Err(Error::Bounds(_))));
    }

    #[test]
    fn flooring_lifts_and_renormalizes() {
        let mut p = vec![0.0, 0.3, 0.7, 0.0];
        floor_distribution(&mut p, 0.05);
        assert!(p.iter().all(|&x| x >= 0.05));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[2] > p[1]);

        let mut zero = vec![0.0; 4];
        floor_distribution(&mut zero, 0.01);
        assert_eq!(zero, vec![0.25; 4]);
    }

    #[test]
    fn flooring_cascades() {
        // 0.06 drops below the floor once the zeros are lifted.
        let mut p = vec![0.0, 0.0, 0.06, 0.94];
        floor_distribution(&mut p, 0.06);
        assert!(p.iter().all(|&x| x >= 0.06 - 1e-15), "{p:?}");
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn project_sums_out() {
        let d = ds(&[2, 3], &[vec![0, 1], vec![1, 2], vec![1, 1], vec![0, 0]]);
        let t = MarginalTable::estimate(&d, &[0, 1]).unwrap();
        assert_eq!(
            t.project(&[1]).unwrap().probs(),
            MarginalTable::estimate(&d, &[1]).unwrap().probs()
        );
        let swapped = t.project(&[1, 0]).unwrap();
        assert_eq!(swapped.probs(), MarginalTable::estimate(&d, &[1, 0]).unwrap().probs());
    }

    #[test]
    fn pairwise_pass_matches_individual_tables() {
        let d = ds(
            &[2, 3, 4],
            &[vec![0, 1, 3], vec![1, 2, 0], vec![1, 1, 1], vec![0, 0, 2], vec![1, 2, 3]],
        );
        let pm = PairwiseMarginals::compute(&d).unwrap();
        assert_eq!(pm.passes, 1);
        for i in 0..3 {
            assert_eq!(pm.one_way[i], MarginalTable::estimate(&d, &[i]).unwrap());
            for j in i + 1..3 {
                assert_eq!(*pm.pair(j, i), MarginalTable::estimate(&d, &[i, j]).unwrap());
            }
        }
        assert_eq!(pair_index(4, 0, 1), 0);
        assert_eq!(pair_index(4, 2, 3), 5);
    }
}
