//! Command-line front end. Errors are reported on stderr as a JSON object
//! `{"error": <kind>, "message": <text>}` with a nonzero exit code.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use synthmia::attack::{activate, write_scores_csv, ActivationConfig, AttackContext, AttackRegistry};
use synthmia::data::population::{Population, PopulationSpec};
use synthmia::data::{load_csv, write_csv, Dataset, Domain};
use synthmia::dp::DpParams;
use synthmia::eval::{auroc, balanced_accuracy, MetricBundle};
use synthmia::harness::{run_experiment, ExperimentConfig};
use synthmia::recovery::{recover_bayesnet, recover_tree, shadow_weights, ShadowConfig, ShadowWeights};
use synthmia::sdg::{GeneratorConfig, GeneratorRegistry, Method};
use synthmia::structure::Structure;
use synthmia::{Error, Result};

#[derive(Parser)]
#[command(name = "synthmia", version, about = "DP synthetic data generators and membership inference attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a household population to use as auxiliary data.
    Simulate {
        /// PopulationSpec JSON; defaults are used for missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a generator on training data and sample synthetic data.
    Generate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        /// Number of synthetic records (default: training size).
        #[arg(long)]
        n_synth: Option<usize>,
        /// Output directory for synth.csv, model.json and domain.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the generator's graph from synthetic data.
    Recover {
        #[arg(long)]
        synth: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shadow-model the structure selection step on auxiliary data.
    Shadow {
        #[arg(long)]
        aux: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        /// Records per shadow subset (the training set size).
        #[arg(long)]
        subset_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score target records with one attack.
    Attack {
        #[arg(long)]
        attack: String,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        aux: PathBuf,
        /// Records to score; membership and household columns are kept.
        #[arg(long)]
        targets: PathBuf,
        /// Domain JSON shared by all inputs (default: inferred from aux).
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Recovered structure JSON (tree or network).
        #[arg(long)]
        structure: Option<PathBuf>,
        /// True structure JSON, for the starred variants.
        #[arg(long)]
        true_structure: Option<PathBuf>,
        /// Shadow weights JSON.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Calibration prior; the simple regime is used when absent.
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute success metrics from a scores CSV with labels.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        /// Calibration prior (default: member fraction of the labels).
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full experiment.
    Replicate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict the epsilon grid to a single value.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        method: Option<Method>,
        /// Restrict the attack list to a single attack.
        #[arg(long)]
        attack: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "mst")]
    method: Method,
    /// Privacy budget; `inf` disables noise.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-9)]
    delta: f64,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// GeneratorConfig JSON; overrides the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl GenArgs {
    fn config(&self) -> Result<GeneratorConfig> {
        if let Some(path) = &self.config {
            let cfg: GeneratorConfig = serde_json::from_str(&read(path)?)?;
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut dp = DpParams::new(self.epsilon, self.delta, self.seed);
        dp.theta = self.theta;
        let cfg = GeneratorConfig::new(self.method, dp);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn load_structure(path: &Path) -> Result<Structure> {
    Ok(serde_json::from_str(&read(path)?)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let mut spec = match config {
                Some(p) => serde_json::from_str(&read(&p)?)?,
                None => PopulationSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            write_csv(&out, &Population::generate(&spec)?.data)
        }
        Command::Generate { data, gen, n_synth, out } => {
            let train = load_csv(&data, None)?;
            let mut cfg = gen.config()?;
            if n_synth.is_some() {
                cfg.n_synth = n_synth;
            }
            let model = GeneratorRegistry::default().for_method(cfg.method)?.fit(&train, &cfg)?;
            let n = cfg.n_synth.unwrap_or(train.n_rows());
            let synth = model.sample(n, cfg.dp.seed.wrapping_add(1))?;
            create_dir(&out)?;
            write_csv(out.join("synth.csv"), &synth)?;
            write_json(&out.join("model.json"), &model)?;
            write_json(&out.join("domain.json"), train.domain())
        }
        Command::Recover { synth, gen, out } => {
            let synth = load_csv(&synth, None)?;
            let cfg = gen.config()?;
            let s = match cfg.method {
                Method::Mst => Structure::Tree(recover_tree(&synth)?),
                Method::PrivBayes => Structure::Bayes(recover_bayesnet(&synth, &cfg)?),
            };
            write_json(&out, &s)
        }
        Command::Shadow { aux, gen, runs, subset_size, out } => {
            let aux = load_csv(&aux, None)?;
            let cfg = gen.config()?;
            let seed = cfg.dp.seed;
            let mut sc = ShadowConfig::new(cfg, subset_size, seed);
            sc.runs = runs;
            write_json(&out, &shadow_weights(&aux, &sc)?)
        }
        Command::Attack {
            attack,
            synth,
            aux,
            targets,
            schema,
            structure,
            true_structure,
            weights,
            prior,
            out,
        } => {
            let attack = AttackRegistry::default().get(&attack)?;
            let (aux, domain) = match schema {
                Some(p) => {
                    let d: Domain = serde_json::from_str(&read(&p)?)?;
                    (load_csv(&aux, Some(&d))?, d)
                }
                None => {
                    let a = load_csv(&aux, None)?;
                    let d = a.domain().clone();
                    (a, d)
                }
            };
            let synth = load_csv(&synth, Some(&domain))?;
            let targets: Dataset = load_csv(&targets, Some(&domain))?;
            let recovered = structure.as_deref().map(load_structure).transpose()?;
            let truth = true_structure.as_deref().map(load_structure).transpose()?;
            let weights: Option<ShadowWeights> = match weights {
                Some(p) => Some(serde_json::from_str(&read(&p)?)?),
                None => None,
            };
            let mut ctx = AttackContext::new(&synth, &aux);
            ctx.recovered_tree = recovered.as_ref().and_then(Structure::as_tree);
            ctx.recovered_network = recovered.as_ref().and_then(Structure::as_bayes);
            ctx.true_structure = truth.as_ref();
            match &weights {
                Some(w) if w.method == Method::Mst => ctx.shadow_tree = Some(w),
                Some(w) => ctx.shadow_network = Some(w),
                None => {}
            }
            let scores = attack.score(&targets, &ctx)?;
            let act_cfg = match prior {
                Some(p) => ActivationConfig::calibrated(p),
                None => ActivationConfig::simple(),
            };
            let act = activate(&scores.log_scores, &act_cfg)?;
            write_scores_csv(&out, &scores, targets.households(), &act, targets.membership())
        }
        Command::Evaluate { scores, prior, out } => {
            let (raw, labels) = read_scores(&scores)?;
            let prior = prior.unwrap_or(labels.iter().filter(|&&y| y).count() as f64 / labels.len().max(1) as f64);
            let simple = activate(&log(&raw), &ActivationConfig::simple())?;
            let calibrated = activate(&log(&raw), &ActivationConfig::calibrated(prior))?;
            let bundle = MetricBundle {
                auroc: auroc(&raw, &labels)?,
                balanced_accuracy_simple: balanced_accuracy(&simple.predictions, &labels)?,
                balanced_accuracy_calibrated: balanced_accuracy(&calibrated.predictions, &labels)?,
                n: labels.len(),
            };
            match out {
                Some(p) => write_json(&p, &bundle),
                None => {
                    println!("{}", serde_json::to_string_pretty(&bundle)?);
                    Ok(())
                }
            }
        }
        Command::Replicate { config, seed, epsilon, method, attack, out } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = epsilon {
                cfg.epsilons = vec![e];
            }
            if let Some(m) = method {
                cfg.methods = vec![m];
            }
            if let Some(a) = attack {
                cfg.attacks = vec![a];
            }
            cfg.validate()?;
            let report = run_experiment(&cfg, &out)?;
            eprintln!(
                "{} replicas ({} resumed), {} metric rows written to {}",
                cfg.replicas,
                report.resumed.len(),
                report.rows.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn log(raw: &[f64]) -> Vec<f64> {
    raw.iter().map(|x| x.ln()).collect()
}

/// Reads `raw_score` and `label` columns of a scores CSV.
fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    let text = read(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing `{name}` column", path.display())))
    };
    let (s, l) = (col("raw_score")?, col("label")?);
    let mut raw = Vec::new();
    let mut labels = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("{}: bad row {}", path.display(), k + 2));
        raw.push(f.get(s).and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(bad)?);
        labels.push(match f.get(l).map(|v| v.trim()) {
            Some("1") | Some("true") => true,
            Some("0") | Some("false") => false,
            _ => return Err(bad()),
        });
    }
    Ok((raw, labels))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = serde_json::json!({ "error": "usage", "message": e.to_string().trim() });
            eprintln!("{report}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
