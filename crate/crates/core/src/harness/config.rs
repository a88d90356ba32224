use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::population::PopulationSpec;
use crate::data::SplitSpec;
use crate::dp::epsilon_serde;
use crate::error::{Error, Result};
use crate::sdg::Method;

/// Where the auxiliary data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxSource {
    /// Simulated household population.
    Population(PopulationSpec),
    /// CSV file with a household column.
    Csv(PathBuf),
}

impl Default for AuxSource {
    fn default() -> Self {
        AuxSource::Population(PopulationSpec::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub replicas: usize,
    #[serde(with = "epsilon_serde::vec")]
    pub epsilons: Vec<f64>,
    /// Delta of the Gaussian mechanism used by the tree generator.
    pub delta: f64,
    pub theta: Option<f64>,
    pub max_parents: Option<usize>,
    pub methods: Vec<Method>,
    pub attacks: Vec<String>,
    /// Also run every attack against the generator it was not designed for.
    pub cross_target: bool,
    pub aux: AuxSource,
    /// Template split; its seed is replaced per replica.
    pub split: SplitSpec,
    /// Synthetic records per dataset; defaults to the training size.
    pub n_synth: Option<usize>,
    pub shadow_runs: usize,
    /// Calibration prior for the household setting. Individual settings use
    /// their empirical member fraction.
    pub household_prior: f64,
    pub seed: u64,
    /// Output directory. Not part of the configuration hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            replicas: 50,
            epsilons: vec![0.1, 1.0, 10.0, 100.0, 1000.0],
            delta: 1e-9,
            theta: None,
            max_parents: Some(4),
            methods: vec![Method::Mst, Method::PrivBayes],
            attacks: [
                "tamis-mst",
                "mamamia-mst",
                "hybrid-mst",
                "tamis-pb",
                "tamis-pb*",
                "mamamia-pb",
                "hybrid-pb",
                "hybrid-pb*",
            ]
            .map(String::from)
            .to_vec(),
            cross_target: false,
            aux: AuxSource::default(),
            split: SplitSpec::default(),
            n_synth: None,
            shadow_runs: 50,
            household_prior: 0.5,
            seed: 0,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("at least one replica is needed".into()));
        }
        if self.epsilons.is_empty() || self.methods.is_empty() || self.attacks.is_empty() {
            return Err(Error::Config("epsilons, methods and attacks must be non-empty".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::Parameter(format!("epsilon must be positive, got {e}")));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Parameter(format!("delta {} outside [0, 1)", self.delta)));
        }
        if self.shadow_runs == 0 {
            return Err(Error::Config("shadow_runs must be positive".into()));
        }
        if !(self.household_prior > 0.0 && self.household_prior < 1.0) {
            return Err(Error::Parameter("household prior outside (0, 1)".into()));
        }
        Ok(())
    }

    /// SHA-256 of the configuration without its output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output = None;
        let text = serde_json::to_string(&c)?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
