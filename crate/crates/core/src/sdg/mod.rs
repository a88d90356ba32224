//! The attacked synthetic data generators. Both follow the same pipeline:
//! select a graph under DP, measure noisy statistics for it, sample.
//!
//! Generators sit behind the [`Generator`] trait and are looked up by name
//! in a [`GeneratorRegistry`].

mod mst;
mod privbayes;
mod sampling;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Domain};
use crate::dp::{BudgetLedger, BudgetSplit, DpParams};
use crate::error::{Error, Result};
use crate::structure::Structure;

pub use mst::{
    edge_score, fit_mst, mst_edge_score, sample_tree, select_tree, tree_density, MstGenerator,
    TreeModel, TreeSelection,
};
pub use privbayes::{
    bayes_density, fit_privbayes, privbayes_score, sample_bayes, select_network,
    BayesNetModel, NetworkSelection, PrivBayesGenerator, ScoreReading,
};

/// Family of graphical model a generator (or an attack) works with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mst,
    PrivBayes,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mst => "mst",
            Method::PrivBayes => "privbayes",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mst" => Ok(Method::Mst),
            "privbayes" | "pb" => Ok(Method::PrivBayes),
            _ => Err(Error::Unknown {
                kind: "method",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub method: Method,
    pub dp: DpParams,
    /// Number of synthetic records; defaults to the training set size.
    #[serde(default)]
    pub n_synth: Option<usize>,
    #[serde(default)]
    pub budget_split: BudgetSplit,
    /// Largest parent set considered by the Bayesian network search.
    #[serde(default = "default_max_parents")]
    pub max_parents: Option<usize>,
    #[serde(default)]
    pub score_reading: ScoreReading,
}

fn default_max_parents() -> Option<usize> {
    Some(4)
}

impl GeneratorConfig {
    pub fn new(method: Method, dp: DpParams) -> Self {
        GeneratorConfig {
            method,
            dp,
            n_synth: None,
            budget_split: BudgetSplit::default(),
            max_parents: default_max_parents(),
            score_reading: ScoreReading::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dp.validate()?;
        self.budget_split.validate()
    }
}

/// A fitted generative model, serialized with its structure, tables, DP
/// parameters and budget ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum FittedModel {
    #[serde(rename = "mst")]
    Tree(TreeModel),
    #[serde(rename = "privbayes")]
    Bayes(BayesNetModel),
}

impl FittedModel {
    pub fn method(&self) -> Method {
        match self {
            FittedModel::Tree(_) => Method::Mst,
            FittedModel::Bayes(_) => Method::PrivBayes,
        }
    }

    pub fn domain(&self) -> &Domain {
        match self {
            FittedModel::Tree(m) => m.domain(),
            FittedModel::Bayes(m) => m.domain(),
        }
    }

    pub fn structure(&self) -> Structure {
        match self {
            FittedModel::Tree(m) => Structure::Tree(m.structure().clone()),
            FittedModel::Bayes(m) => Structure::Bayes(m.structure().clone()),
        }
    }

    pub fn ledger(&self) -> Option<&BudgetLedger> {
        match self {
            FittedModel::Tree(m) => m.ledger(),
            FittedModel::Bayes(m) => m.ledger(),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            FittedModel::Tree(m) => sample_tree(m, n, seed),
            FittedModel::Bayes(m) => sample_bayes(m, n, seed),
        }
    }

    pub fn density(&self, record: &[u32]) -> Result<f64> {
        match self {
            FittedModel::Tree(m) => tree_density(m, record),
            FittedModel::Bayes(m) => bayes_density(m, record),
        }
    }
}

pub trait Generator: Send + Sync {
    fn name(&self) -> &'static str;

    fn method(&self) -> Method;

    /// Runs the whole pipeline: private structure selection, noisy
    /// measurements, model assembly.
    fn fit(&self, train: &Dataset, cfg: &GeneratorConfig) -> Result<FittedModel>;

    /// Runs the structure selection step only.
    fn select_structure(&self, data: &Dataset, cfg: &GeneratorConfig) -> Result<Structure>;
}

#[derive(Clone)]
pub struct GeneratorRegistry {
    generators: BTreeMap<String, Arc<dyn Generator>>,
}

impl Default for GeneratorRegistry {
    fn default() -> Self {
        let mut r = GeneratorRegistry::empty();
        r.register(Arc::new(MstGenerator));
        r.register(Arc::new(PrivBayesGenerator));
        r
    }
}

impl GeneratorRegistry {
    pub fn empty() -> Self {
        GeneratorRegistry {
            generators: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, g: Arc<dyn Generator>) {
        self.generators.insert(g.name().to_string(), g);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Generator>> {
        self.generators
            .get(&name.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| Error::Unknown {
                kind: "generator",
                name: name.to_string(),
            })
    }

    pub fn for_method(&self, method: Method) -> Result<Arc<dyn Generator>> {
        self.get(method.name())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.generators.keys().map(String::as_str)
    }
}

pub(crate) fn check_fit_inputs(train: &Dataset, cfg: &GeneratorConfig, min_attrs: usize) -> Result<()> {
    cfg.validate()?;
    train.domain().ensure_nondegenerate()?;
    if train.n_attrs() < min_attrs {
        return Err(Error::Config(format!(
            "{} needs at least {min_attrs} attributes, got {}",
            cfg.method,
            train.n_attrs()
        )));
    }
    if train.is_empty() {
        return Err(Error::Estimation("empty training set".into()));
    }
    Ok(())
}
