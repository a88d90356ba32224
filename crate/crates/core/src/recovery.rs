//! Attacker-side structure estimation from the synthetic data, and shadow
//! modeling on the auxiliary data.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::marginals::PairwiseMarginals;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sdg::{edge_score, select_network, select_tree, GeneratorConfig, Method};
use crate::structure::{maximum_spanning_tree, BayesStructure, Structure, StructureKey, TreeStructure};

/// Work done by [`recover_tree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecoveryCost {
    pub marginal_passes: usize,
    pub rows_scanned: usize,
    pub spanning_tree_runs: usize,
}

/// Exact maximum spanning tree of the edge scores measured on `synth`.
pub fn recover_tree(synth: &Dataset) -> Result<TreeStructure> {
    recover_tree_with_cost(synth).map(|(t, _)| t)
}

pub fn recover_tree_with_cost(synth: &Dataset) -> Result<(TreeStructure, RecoveryCost)> {
    if synth.n_attrs() < 2 {
        return Err(Error::Config("tree recovery needs at least 2 attributes".into()));
    }
    let m = PairwiseMarginals::compute(synth)?;
    let tree = maximum_spanning_tree(synth.n_attrs(), |i, j| {
        edge_score(m.pair(i, j), m.one_way[i].probs(), m.one_way[j].probs())
    });
    let cost = RecoveryCost {
        marginal_passes: m.passes,
        rows_scanned: m.rows_scanned,
        spanning_tree_runs: 1,
    };
    Ok((tree, cost))
}

/// One run of the network selection step on `synth`, with the attacked
/// generator's parameters and `cfg.dp.seed` as the seed.
pub fn recover_bayesnet(synth: &Dataset, cfg: &GeneratorConfig) -> Result<BayesStructure> {
    let mut rng = rng_from_seed(cfg.dp.seed);
    Ok(select_network(synth, cfg, &mut rng)?.structure)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowConfig {
    /// Parameters of the attacked generator; its method picks the
    /// selection procedure.
    pub generator: GeneratorConfig,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub subset_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_runs() -> usize {
    50
}

impl ShadowConfig {
    pub fn new(generator: GeneratorConfig, subset_size: usize, seed: u64) -> Self {
        ShadowConfig {
            generator,
            runs: default_runs(),
            subset_size,
            seed,
        }
    }
}

/// How many shadow runs selected each structural choice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowWeights {
    pub method: Method,
    pub runs: usize,
    pub weights: BTreeMap<StructureKey, u32>,
}

impl ShadowWeights {
    /// Counts the keys of each structure.
    pub fn from_structures<'a>(method: Method, structures: impl IntoIterator<Item = &'a Structure>) -> Self {
        let mut weights = BTreeMap::new();
        let mut runs = 0;
        for s in structures {
            runs += 1;
            for k in s.keys() {
                *weights.entry(k).or_insert(0) += 1;
            }
        }
        ShadowWeights { method, runs, weights }
    }

    /// Weight 1 on every key of `structure`.
    pub fn indicator(structure: &Structure) -> Self {
        let method = match structure {
            Structure::Tree(_) => Method::Mst,
            Structure::Bayes(_) => Method::PrivBayes,
        };
        ShadowWeights::from_structures(method, [structure])
    }

    pub fn get(&self, key: &StructureKey) -> u32 {
        self.weights.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.weights.values().map(|&w| w as u64).sum()
    }
}

/// Runs the generator's selection step on `cfg.runs` uniform subsets of
/// `aux` (without replacement) and counts the selected keys.
pub fn shadow_weights(aux: &Dataset, cfg: &ShadowConfig) -> Result<ShadowWeights> {
    if cfg.runs == 0 {
        return Err(Error::Config("shadow modeling needs at least one run".into()));
    }
    if cfg.subset_size == 0 || cfg.subset_size > aux.n_rows() {
        return Err(Error::Config(format!(
            "shadow subset size {} for {} auxiliary records",
            cfg.subset_size,
            aux.n_rows()
        )));
    }
    let structures = (0..cfg.runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, &[k as u64, 0]));
            let mut rows = rand::seq::index::sample(&mut rng, aux.n_rows(), cfg.subset_size).into_vec();
            rows.sort_unstable();
            let subset = aux.select_rows(&rows);
            let mut gen = cfg.generator.clone();
            gen.dp.seed = derive_seed(cfg.seed, &[k as u64, 1]);
            let mut rng = rng_from_seed(gen.dp.seed);
            Ok(match gen.method {
                Method::Mst => Structure::Tree(select_tree(&subset, &gen, &mut rng)?.structure),
                Method::PrivBayes => Structure::Bayes(select_network(&subset, &gen, &mut rng)?.structure),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShadowWeights::from_structures(cfg.generator.method, &structures))
}
