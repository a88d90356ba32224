//! Experiment orchestration: replicas of the split, generate, recover,
//! attack and evaluate loop, with resumable per-replica outputs.

mod config;
mod report;

use std::path::Path;

use rayon::prelude::*;

use crate::attack::{aggregate_households, AttackContext, AttackRegistry, Requirement, ScoreVector};
use crate::data::population::Population;
use crate::data::{load_csv, make_snake_split, Dataset};
use crate::dp::DpParams;
use crate::error::{Error, Result};
use crate::eval::{evaluate_scores, recovery_metrics, RecoveryMetrics};
use crate::recovery::{recover_bayesnet, recover_tree, shadow_weights, ShadowConfig, ShadowWeights};
use crate::rng::{derive_seed, tag};
use crate::sdg::{GeneratorConfig, GeneratorRegistry, Method};
use crate::structure::Structure;

pub use config::{AuxSource, ExperimentConfig};
pub use report::{format_epsilon, read_rows, summarize, write_rows, MetricRow, SummaryCell};

pub const SETTINGS: [&str; 3] = ["aux-individuals", "target-individuals", "target-households"];

/// Builds the auxiliary dataset described by the configuration.
pub fn load_aux(cfg: &ExperimentConfig) -> Result<Dataset> {
    let aux = match &cfg.aux {
        AuxSource::Population(spec) => Population::generate(spec)?.data,
        AuxSource::Csv(path) => load_csv(path, None)?,
    };
    if aux.households().is_none() {
        return Err(Error::Config("auxiliary data needs household ids".into()));
    }
    Ok(aux)
}

fn generator_config(cfg: &ExperimentConfig, method: Method, epsilon: f64, seed: u64) -> GeneratorConfig {
    let mut dp = DpParams::new(epsilon, cfg.delta, seed);
    dp.theta = cfg.theta;
    let mut g = GeneratorConfig::new(method, dp);
    g.max_parents = cfg.max_parents;
    g.n_synth = cfg.n_synth;
    g
}

/// Attacks run against data from `method`, in configuration order.
fn attacks_for(cfg: &ExperimentConfig, method: Method, registry: &AttackRegistry) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for name in &cfg.attacks {
        let a = registry.get(name)?;
        let designed = a.method().is_none_or(|m| m == method);
        let needs_truth = matches!(a.requirement(), Requirement::TrueTree | Requirement::TrueNetwork);
        if designed || (cfg.cross_target && !needs_truth) {
            out.push(name.clone());
        }
    }
    Ok(out)
}

fn recovery_rows(
    rows: &mut Vec<MetricRow>,
    base: &MetricRow,
    label: &str,
    m: &RecoveryMetrics,
) {
    let metrics = [
        ("choice_accuracy", m.choice_accuracy),
        ("precision", m.precision),
        ("recall", m.recall),
        ("jaccard", m.jaccard),
        ("perfect_match", f64::from(u8::from(m.perfect_match))),
    ];
    for (name, value) in metrics {
        rows.push(MetricRow {
            attack: label.to_string(),
            setting: "structure".into(),
            metric: name.into(),
            value,
            ..base.clone()
        });
    }
}

/// One replica: split, then for every generator and epsilon fit, sample,
/// recover the graph, score every attack in the three settings and
/// evaluate. Deterministic given the master seed and replica index.
pub fn run_replica(cfg: &ExperimentConfig, aux: &Dataset, replica: usize) -> Result<Vec<MetricRow>> {
    let seed = derive_seed(cfg.seed, &[replica as u64]);
    let generators = GeneratorRegistry::default();
    let attacks = AttackRegistry::default();

    let mut spec = cfg.split.clone();
    spec.seed = derive_seed(seed, &[tag("split")]);
    let split = make_snake_split(aux, &spec).map_err(|e| e.at_stage(replica, "split"))?;
    let aux_labels = split.aux_labels(aux.n_rows());
    let aux_prior = split.train_rows.len() as f64 / aux.n_rows() as f64;
    let target_prior =
        split.target_labels.iter().filter(|&&y| y).count() as f64 / split.target_labels.len().max(1) as f64;
    let households = split.target.households().expect("split keeps households").to_vec();
    let mut rows = Vec::new();

    for &method in &cfg.methods {
        for &epsilon in &cfg.epsilons {
            let stream = [tag(method.name()), epsilon.to_bits()];
            let stage = |s: &str| format!("{} at epsilon {}: {s}", method, format_epsilon(epsilon));
            let fit_seed = derive_seed(seed, &[stream[0], stream[1], tag("fit")]);
            let gen_cfg = generator_config(cfg, method, epsilon, fit_seed);
            let model = generators
                .for_method(method)?
                .fit(&split.train, &gen_cfg)
                .map_err(|e| e.at_stage(replica, stage("fit")))?;
            let n_synth = cfg.n_synth.unwrap_or(split.train.n_rows());
            let synth = model
                .sample(n_synth, derive_seed(seed, &[stream[0], stream[1], tag("sample")]))
                .map_err(|e| e.at_stage(replica, stage("sample")))?;
            let truth = model.structure();
            let names = attacks_for(cfg, method, &attacks)?;
            let needs = |r: Requirement| names.iter().any(|n| attacks.get(n).map(|a| a.requirement() == r).unwrap_or(false));

            let tree = if method == Method::Mst || needs(Requirement::RecoveredTree) {
                Some(recover_tree(&synth).map_err(|e| e.at_stage(replica, stage("recover tree")))?)
            } else {
                None
            };
            let network = if method == Method::PrivBayes || needs(Requirement::RecoveredNetwork) {
                let rc = generator_config(
                    cfg,
                    Method::PrivBayes,
                    epsilon,
                    derive_seed(seed, &[stream[0], stream[1], tag("recover")]),
                );
                Some(recover_bayesnet(&synth, &rc).map_err(|e| e.at_stage(replica, stage("recover network")))?)
            } else {
                None
            };
            let shadow = |m: Method| -> Result<Option<ShadowWeights>> {
                let r = if m == Method::Mst { Requirement::ShadowTree } else { Requirement::ShadowNetwork };
                if !needs(r) {
                    return Ok(None);
                }
                let mut sc = ShadowConfig::new(
                    generator_config(cfg, m, epsilon, 0),
                    split.train.n_rows(),
                    derive_seed(seed, &[stream[0], stream[1], tag("shadow"), tag(m.name())]),
                );
                sc.runs = cfg.shadow_runs;
                shadow_weights(aux, &sc).map(Some).map_err(|e| e.at_stage(replica, stage("shadow")))
            };
            let shadow_tree = shadow(Method::Mst)?;
            let shadow_network = shadow(Method::PrivBayes)?;

            let base = MetricRow {
                generator: method.name().to_string(),
                epsilon: format_epsilon(epsilon),
                replica,
                attack: String::new(),
                setting: String::new(),
                metric: String::new(),
                value: 0.0,
            };
            let truth_keys = truth.keys();
            match method {
                Method::Mst => {
                    let t = Structure::Tree(tree.clone().expect("recovered above"));
                    recovery_rows(&mut rows, &base, "recovery", &recovery_metrics(&truth_keys, &t.keys()));
                }
                Method::PrivBayes => {
                    let n = Structure::Bayes(network.clone().expect("recovered above"));
                    recovery_rows(&mut rows, &base, "recovery", &recovery_metrics(&truth_keys, &n.keys()));
                }
            }
            let own_shadow = if method == Method::Mst { &shadow_tree } else { &shadow_network };
            if let Some(w) = own_shadow {
                let keys = w.weights.iter().filter(|(_, &c)| c > 0).map(|(k, _)| k.clone()).collect();
                recovery_rows(&mut rows, &base, "shadow", &recovery_metrics(&truth_keys, &keys));
            }

            let ctx = AttackContext {
                synth: &synth,
                aux,
                recovered_tree: tree.as_ref(),
                recovered_network: network.as_ref(),
                true_structure: Some(&truth),
                shadow_tree: shadow_tree.as_ref(),
                shadow_network: shadow_network.as_ref(),
            };
            for name in &names {
                let scores = attacks
                    .get(name)?
                    .score(aux, &ctx)
                    .map_err(|e| e.at_stage(replica, stage(name)))?;
                let target = scores.select(&split.target_rows);
                let by_house = aggregate_households(&target, &households)?;
                let house_labels: Vec<bool> = by_house
                    .ids
                    .iter()
                    .map(|h| split.member_households.binary_search(h).is_ok())
                    .collect();
                let settings: [(&str, &ScoreVector, &[bool], f64); 3] = [
                    (SETTINGS[0], &scores, &aux_labels, aux_prior),
                    (SETTINGS[1], &target, &split.target_labels, target_prior),
                    (SETTINGS[2], &by_house, &house_labels, cfg.household_prior),
                ];
                for (setting, s, labels, prior) in settings {
                    let m = evaluate_scores(&s.log_scores, labels, prior)
                        .map_err(|e| e.at_stage(replica, stage(name)))?;
                    for (metric, value) in [
                        ("auroc", m.auroc),
                        ("balanced_accuracy_simple", m.balanced_accuracy_simple),
                        ("balanced_accuracy_calibrated", m.balanced_accuracy_calibrated),
                    ] {
                        rows.push(MetricRow {
                            attack: name.clone(),
                            setting: setting.into(),
                            metric: metric.into(),
                            value,
                            ..base.clone()
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Output of a full experiment.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<MetricRow>,
    pub summary: Vec<SummaryCell>,
    /// Replicas read back from a previous run.
    pub resumed: Vec<usize>,
}

const HASH_FILE: &str = "config.sha256";

/// Runs every replica (in parallel), writing `replicas/replica_XXXX.csv`,
/// `metrics.csv` and `summary.json` under `out`. Replicas whose file already
/// exists are read back instead of recomputed, provided the stored
/// configuration hash matches.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    let registry = AttackRegistry::default();
    for name in &cfg.attacks {
        registry.get(name)?;
    }
    let hash = cfg.hash()?;
    let replica_dir = out.join("replicas");
    std::fs::create_dir_all(&replica_dir).map_err(|e| Error::io(&replica_dir, e))?;
    let hash_path = out.join(HASH_FILE);
    match std::fs::read_to_string(&hash_path) {
        Ok(stored) if stored.trim() != hash => {
            return Err(Error::ConfigMismatch { dir: out.to_path_buf() });
        }
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            std::fs::write(&hash_path, format!("{hash}\n")).map_err(|e| Error::io(&hash_path, e))?;
            let cfg_path = out.join("config.json");
            let text = serde_json::to_string_pretty(cfg)?;
            std::fs::write(&cfg_path, text).map_err(|e| Error::io(&cfg_path, e))?;
        }
        Err(e) => return Err(Error::io(&hash_path, e)),
    }

    let aux = load_aux(cfg)?;
    let results: Vec<(Vec<MetricRow>, bool)> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let path = replica_dir.join(format!("replica_{r:04}.csv"));
            if path.exists() {
                return Ok((read_rows(&path)?, true));
            }
            let rows = run_replica(cfg, &aux, r)?;
            let tmp = path.with_extension("csv.tmp");
            write_rows(&tmp, &rows)?;
            std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
            Ok((rows, false))
        })
        .collect::<Result<_>>()?;

    let resumed = results.iter().enumerate().filter(|(_, r)| r.1).map(|(i, _)| i).collect();
    let rows: Vec<MetricRow> = results.into_iter().flat_map(|(r, _)| r).collect();
    write_rows(&out.join("metrics.csv"), &rows)?;
    let summary = summarize(&rows);
    let summary_path = out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .map_err(|e| Error::io(&summary_path, e))?;
    Ok(ExperimentReport { rows, summary, resumed })
}
