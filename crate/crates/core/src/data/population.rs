//! Synthetic household-structured populations to stand in for a real
//! census-like auxiliary dataset.
//!
//! Records follow a random tree-structured Bayesian network over the
//! attributes. Members of one household copy each attribute from a shared
//! household template with probability `cohesion`, which makes records of a
//! household correlated the way real households are.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{Dataset, Domain};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub n_rows: usize,
    pub n_attributes: usize,
    pub min_cardinality: usize,
    pub max_cardinality: usize,
    pub max_household_size: usize,
    /// Probability that a member copies an attribute from the household template.
    pub cohesion: f64,
    /// Weight of the deterministic parent-to-child mapping in each conditional.
    pub dependence: f64,
    /// Dirichlet concentration of the random part of each distribution.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            n_rows: 50_000,
            n_attributes: 8,
            min_cardinality: 2,
            max_cardinality: 8,
            max_household_size: 10,
            cohesion: 0.7,
            dependence: 0.6,
            concentration: 0.5,
            seed: 0,
        }
    }
}

/// Ground-truth network the population was drawn from.
#[derive(Clone, Debug)]
pub struct Population {
    pub data: Dataset,
    /// `parents[i]` is the parent attribute of `i` (`None` for the root 0).
    pub parents: Vec<Option<usize>>,
    root: Vec<f64>,
    /// `conditionals[i][parent_value]` is the distribution of attribute `i`.
    conditionals: Vec<Vec<Vec<f64>>>,
}

fn dirichlet<R: Rng>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    let mut v: Vec<f64> = (0..k).map(|_| gamma.sample(rng).max(1e-300)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64]) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u32;
        }
    }
    (probs.len() - 1) as u32
}

impl Population {
    pub fn generate(spec: &PopulationSpec) -> Result<Population> {
        if spec.n_attributes == 0
            || spec.min_cardinality == 0
            || spec.min_cardinality > spec.max_cardinality
            || spec.max_household_size == 0
        {
            return Err(Error::Config("degenerate population spec".into()));
        }
        if !(0.0..=1.0).contains(&spec.cohesion) || !(0.0..=1.0).contains(&spec.dependence) {
            return Err(Error::Config("cohesion and dependence must lie in [0, 1]".into()));
        }
        if spec.concentration <= 0.0 {
            return Err(Error::Config("concentration must be positive".into()));
        }
        let mut rng = rng_from_seed(spec.seed);
        let d = spec.n_attributes;
        let cards: Vec<usize> = (0..d)
            .map(|_| rng.random_range(spec.min_cardinality..=spec.max_cardinality))
            .collect();
        let parents: Vec<Option<usize>> = (0..d)
            .map(|i| (i > 0).then(|| rng.random_range(0..i)))
            .collect();
        let root = dirichlet(&mut rng, cards[0], spec.concentration);
        let mut conditionals = vec![Vec::new(); d];
        for i in 1..d {
            let p = parents[i].expect("non-root");
            conditionals[i] = (0..cards[p])
                .map(|_| {
                    let favourite = rng.random_range(0..cards[i]);
                    let mut row = dirichlet(&mut rng, cards[i], spec.concentration);
                    row.iter_mut()
                        .for_each(|x| *x *= 1.0 - spec.dependence);
                    row[favourite] += spec.dependence;
                    row
                })
                .collect();
        }

        let mut pop = Population {
            data: Dataset::from_columns(Domain::from_cardinalities(&cards)?, vec![Vec::new(); d])?,
            parents,
            root,
            conditionals,
        };

        let mut columns = vec![Vec::with_capacity(spec.n_rows); d];
        let mut ids = Vec::with_capacity(spec.n_rows);
        let mut household = 0u64;
        let mut member = vec![0u32; d];
        while ids.len() < spec.n_rows {
            let size = rng
                .random_range(1..=spec.max_household_size)
                .min(spec.n_rows - ids.len());
            let template = pop.sample_record(&mut rng);
            for _ in 0..size {
                for a in 0..d {
                    member[a] = if rng.random::<f64>() < spec.cohesion {
                        template[a]
                    } else {
                        pop.sample_attr(&mut rng, a, &member)
                    };
                    columns[a].push(member[a]);
                }
                ids.push(household);
            }
            household += 1;
        }
        pop.data = Dataset::from_columns(pop.data.domain().clone(), columns)?.with_households(ids)?;
        Ok(pop)
    }

    fn sample_attr<R: Rng>(&self, rng: &mut R, attr: usize, partial: &[u32]) -> u32 {
        match self.parents[attr] {
            None => draw(rng, &self.root),
            Some(p) => draw(rng, &self.conditionals[attr][partial[p] as usize]),
        }
    }

    fn sample_record<R: Rng>(&self, rng: &mut R) -> Vec<u32> {
        let mut rec = vec![0u32; self.parents.len()];
        for a in 0..rec.len() {
            rec[a] = self.sample_attr(rng, a, &rec);
        }
        rec
    }

    /// Undirected edges `(min, max)` of the generating tree.
    pub fn tree_edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (p.min(i), p.max(i))))
            .collect();
        e.sort_unstable();
        e
    }
}
