//! Membership inference attacks. Each attack computes a density-ratio score
//! per target record from the synthetic data, the auxiliary data and some
//! estimate of the generator's graph.
//!
//! Attacks sit behind the [`Attack`] trait and are looked up by name in an
//! [`AttackRegistry`].

mod activation;
mod scores;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::recovery::ShadowWeights;
use crate::sdg::Method;
use crate::structure::{BayesStructure, Structure, TreeStructure};

pub use activation::{
    activate, activate_calibrated, activate_simple, quantile, Activation, ActivationConfig, Regime,
};
pub use scores::{
    hybrid_mst, hybrid_pb, mamamia_mst, mamamia_pb, marginals_pi, marginals_sigma, tamis_mst,
    tamis_mst_avg, tamis_pb, weighted_ratio_mean,
};

/// Attack scores, kept as natural logarithms of the ratios `Λ(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub attack: String,
    pub log_scores: Vec<f64>,
    /// Record (or household) identifiers, aligned with the scores.
    pub ids: Vec<u64>,
}

impl ScoreVector {
    pub fn new(attack: impl Into<String>, log_scores: Vec<f64>) -> Self {
        let ids = (0..log_scores.len() as u64).collect();
        ScoreVector { attack: attack.into(), log_scores, ids }
    }

    pub fn with_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.log_scores.len() {
            return Err(Error::Parameter("one id per score expected".into()));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.log_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_scores.is_empty()
    }

    /// The ratios themselves.
    pub fn raw(&self) -> Vec<f64> {
        self.log_scores.iter().map(|l| l.exp()).collect()
    }

    /// Scores of the records at `rows`, keeping their ids.
    pub fn select(&self, rows: &[usize]) -> ScoreVector {
        ScoreVector {
            attack: self.attack.clone(),
            log_scores: rows.iter().map(|&r| self.log_scores[r]).collect(),
            ids: rows.iter().map(|&r| self.ids[r]).collect(),
        }
    }
}

/// Mean raw score per household, households in increasing id order. The
/// returned ids are household ids.
pub fn aggregate_households(scores: &ScoreVector, households: &[u64]) -> Result<ScoreVector> {
    if households.len() != scores.len() {
        return Err(Error::Parameter(format!(
            "{} household ids for {} scores",
            households.len(),
            scores.len()
        )));
    }
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (&h, &s) in households.iter().zip(&scores.log_scores) {
        groups.entry(h).or_default().push(s);
    }
    let (ids, log_scores) = groups
        .into_iter()
        .map(|(h, v)| {
            let n = v.len() as f64;
            (h, scores::log_sum_exp(v.iter().copied()) - n.ln())
        })
        .unzip();
    Ok(ScoreVector { attack: scores.attack.clone(), log_scores, ids })
}

/// Writes `record_id, household_id, raw_score, probability, prediction,
/// label` rows. Household and label columns are left empty when unknown.
pub fn write_scores_csv(
    path: &Path,
    scores: &ScoreVector,
    households: Option<&[u64]>,
    activation: &Activation,
    labels: Option<&[bool]>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "record_id,household_id,raw_score,probability,prediction,label").map_err(io)?;
    for (k, (&id, &l)) in scores.ids.iter().zip(&scores.log_scores).enumerate() {
        let hh = households.map(|h| h[k].to_string()).unwrap_or_default();
        let label = labels.map(|y| u8::from(y[k]).to_string()).unwrap_or_default();
        writeln!(
            w,
            "{id},{hh},{},{},{},{label}",
            l.exp(),
            activation.probabilities[k],
            u8::from(activation.predictions[k])
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Everything an attack may draw on. Attacks fail with a configuration
/// error when an input they need is missing.
#[derive(Clone, Copy, Debug)]
pub struct AttackContext<'a> {
    pub synth: &'a Dataset,
    pub aux: &'a Dataset,
    /// Tree recovered from the synthetic data.
    pub recovered_tree: Option<&'a TreeStructure>,
    /// Network recovered from the synthetic data.
    pub recovered_network: Option<&'a BayesStructure>,
    /// Graph actually used by the generator.
    pub true_structure: Option<&'a Structure>,
    pub shadow_tree: Option<&'a ShadowWeights>,
    pub shadow_network: Option<&'a ShadowWeights>,
}

impl<'a> AttackContext<'a> {
    pub fn new(synth: &'a Dataset, aux: &'a Dataset) -> Self {
        AttackContext {
            synth,
            aux,
            recovered_tree: None,
            recovered_network: None,
            true_structure: None,
            shadow_tree: None,
            shadow_network: None,
        }
    }

    fn tree(&self, attack: &str) -> Result<&'a TreeStructure> {
        self.recovered_tree
            .ok_or_else(|| missing(attack, "a recovered tree"))
    }

    fn network(&self, attack: &str) -> Result<&'a BayesStructure> {
        self.recovered_network
            .ok_or_else(|| missing(attack, "a recovered network"))
    }

    fn true_network(&self, attack: &str) -> Result<&'a BayesStructure> {
        self.true_structure
            .and_then(Structure::as_bayes)
            .ok_or_else(|| missing(attack, "the true network"))
    }

    fn true_tree(&self, attack: &str) -> Result<&'a TreeStructure> {
        self.true_structure
            .and_then(Structure::as_tree)
            .ok_or_else(|| missing(attack, "the true tree"))
    }
}

fn missing(attack: &str, what: &str) -> Error {
    Error::Config(format!("attack `{attack}` needs {what}"))
}

/// Inputs an attack reads beyond the synthetic and auxiliary data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Requirement {
    None,
    RecoveredTree,
    RecoveredNetwork,
    ShadowTree,
    ShadowNetwork,
    TrueTree,
    TrueNetwork,
}

pub trait Attack: Send + Sync {
    fn name(&self) -> &'static str;

    /// Generator family the attack models, if any.
    fn method(&self) -> Option<Method>;

    fn requirement(&self) -> Requirement;

    fn score(&self, targets: &Dataset, ctx: &AttackContext<'_>) -> Result<ScoreVector>;
}

macro_rules! attack {
    ($ty:ident, $name:literal, $method:expr, $req:expr, |$x:ident, $ctx:ident| $body:expr) => {
        pub struct $ty;

        impl Attack for $ty {
            fn name(&self) -> &'static str {
                $name
            }

            fn method(&self) -> Option<Method> {
                $method
            }

            fn requirement(&self) -> Requirement {
                $req
            }

            fn score(&self, $x: &Dataset, $ctx: &AttackContext<'_>) -> Result<ScoreVector> {
                let mut s: ScoreVector = $body?;
                s.attack = $name.to_string();
                Ok(s)
            }
        }
    };
}

attack!(TamisMst, "tamis-mst", Some(Method::Mst), Requirement::RecoveredTree, |x, c| {
    tamis_mst(x, c.tree("tamis-mst")?, c.synth, c.aux)
});
attack!(TamisMstTrue, "tamis-mst*", Some(Method::Mst), Requirement::TrueTree, |x, c| {
    tamis_mst(x, c.true_tree("tamis-mst*")?, c.synth, c.aux)
});
attack!(MamaMiaMst, "mamamia-mst", Some(Method::Mst), Requirement::ShadowTree, |x, c| {
    mamamia_mst(x, c.shadow_tree.ok_or_else(|| missing("mamamia-mst", "tree shadow weights"))?, c.synth, c.aux)
});
attack!(HybridMst, "hybrid-mst", Some(Method::Mst), Requirement::RecoveredTree, |x, c| {
    hybrid_mst(x, c.tree("hybrid-mst")?, c.synth, c.aux)
});
attack!(TamisMstAvg, "tamis-mst-avg", Some(Method::Mst), Requirement::RecoveredTree, |x, c| {
    tamis_mst_avg(x, c.tree("tamis-mst-avg")?, c.synth, c.aux)
});
attack!(MarginalsSigma, "marginals-sigma", None, Requirement::None, |x, c| {
    marginals_sigma(x, c.synth, c.aux)
});
attack!(MarginalsPi, "marginals-pi", None, Requirement::None, |x, c| {
    marginals_pi(x, c.synth, c.aux)
});
attack!(TamisPb, "tamis-pb", Some(Method::PrivBayes), Requirement::RecoveredNetwork, |x, c| {
    tamis_pb(x, c.network("tamis-pb")?, c.synth, c.aux)
});
attack!(TamisPbTrue, "tamis-pb*", Some(Method::PrivBayes), Requirement::TrueNetwork, |x, c| {
    tamis_pb(x, c.true_network("tamis-pb*")?, c.synth, c.aux)
});
attack!(MamaMiaPb, "mamamia-pb", Some(Method::PrivBayes), Requirement::ShadowNetwork, |x, c| {
    mamamia_pb(x, c.shadow_network.ok_or_else(|| missing("mamamia-pb", "network shadow weights"))?, c.synth, c.aux)
});
attack!(HybridPb, "hybrid-pb", Some(Method::PrivBayes), Requirement::RecoveredNetwork, |x, c| {
    hybrid_pb(x, c.network("hybrid-pb")?, c.synth, c.aux)
});
attack!(HybridPbTrue, "hybrid-pb*", Some(Method::PrivBayes), Requirement::TrueNetwork, |x, c| {
    hybrid_pb(x, c.true_network("hybrid-pb*")?, c.synth, c.aux)
});

#[derive(Clone)]
pub struct AttackRegistry {
    attacks: BTreeMap<String, Arc<dyn Attack>>,
}

impl Default for AttackRegistry {
    fn default() -> Self {
        let mut r = AttackRegistry::empty();
        let all: [Arc<dyn Attack>; 12] = [
            Arc::new(TamisMst),
            Arc::new(TamisMstTrue),
            Arc::new(MamaMiaMst),
            Arc::new(HybridMst),
            Arc::new(TamisMstAvg),
            Arc::new(MarginalsSigma),
            Arc::new(MarginalsPi),
            Arc::new(TamisPb),
            Arc::new(TamisPbTrue),
            Arc::new(MamaMiaPb),
            Arc::new(HybridPb),
            Arc::new(HybridPbTrue),
        ];
        for a in all {
            r.register(a);
        }
        r
    }
}

impl AttackRegistry {
    pub fn empty() -> Self {
        AttackRegistry { attacks: BTreeMap::new() }
    }

    pub fn register(&mut self, attack: Arc<dyn Attack>) {
        self.attacks.insert(attack.name().to_string(), attack);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Attack>> {
        self.attacks.get(name).cloned().ok_or_else(|| Error::Unknown {
            kind: "attack",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attacks.keys().map(String::as_str)
    }
}
