use synthmia::data::population::PopulationSpec;
use synthmia::data::SplitSpec;
use synthmia::harness::{read_rows, run_experiment, summarize, AuxSource, ExperimentConfig, SummaryCell};
use synthmia::sdg::Method;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        replicas: 2,
        epsilons: vec![1.0],
        methods: vec![Method::Mst],
        attacks: vec!["tamis-mst".into(), "mamamia-mst".into()],
        aux: AuxSource::Population(PopulationSpec {
            n_rows: 2000,
            n_attributes: 4,
            max_cardinality: 4,
            seed: 3,
            ..Default::default()
        }),
        split: SplitSpec { n_target_households: 10, train_size: 400, ..Default::default() },
        shadow_runs: 3,
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn outputs_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let first = run_experiment(&cfg, dir.path()).unwrap();
    assert!(first.resumed.is_empty());
    for f in ["metrics.csv", "summary.json", "config.json", "config.sha256", "replicas/replica_0001.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    // 2 replicas x (5 recovery + 5 shadow + 2 attacks x 3 settings x 3 metrics)
    assert_eq!(first.rows.len(), 2 * (10 + 18));

    std::fs::remove_file(dir.path().join("replicas/replica_0001.csv")).unwrap();
    let second = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(second.resumed, vec![0]);
    assert_eq!(second.rows, first.rows);
    assert_eq!(read_rows(&dir.path().join("metrics.csv")).unwrap(), first.rows);
}

#[test]
fn changed_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.replicas = 1;
    run_experiment(&cfg, dir.path()).unwrap();
    cfg.seed += 1;
    let err = run_experiment(&cfg, dir.path()).unwrap_err();
    assert_eq!(err.kind(), "config_mismatch");
    // the output directory does not enter the hash
    let mut moved = small();
    moved.replicas = 1;
    moved.output = Some("/elsewhere".into());
    run_experiment(&moved, dir.path()).unwrap();
}

#[test]
fn noiseless_tree_is_recovered_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.replicas = 1;
    cfg.epsilons = vec![f64::INFINITY];
    cfg.delta = 0.0;
    cfg.n_synth = Some(20_000);
    let rep = run_experiment(&cfg, dir.path()).unwrap();
    let pm = rep
        .rows
        .iter()
        .find(|r| r.attack == "recovery" && r.metric == "perfect_match")
        .unwrap();
    assert_eq!(pm.epsilon, "inf");
    assert_eq!(pm.value, 1.0);
}

#[test]
fn cross_target_runs_both_families() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.replicas = 1;
    cfg.methods = vec![Method::Mst, Method::PrivBayes];
    cfg.attacks = vec!["tamis-mst".into(), "tamis-pb".into(), "tamis-pb*".into()];
    cfg.cross_target = true;
    let rep = run_experiment(&cfg, dir.path()).unwrap();
    let ran = |g: &str, a: &str| rep.rows.iter().any(|r| r.generator == g && r.attack == a);
    assert!(ran("mst", "tamis-mst") && ran("mst", "tamis-pb"));
    assert!(ran("privbayes", "tamis-mst") && ran("privbayes", "tamis-pb*"));
    assert!(!ran("mst", "tamis-pb*"));
    for r in &rep.rows {
        assert!(r.value.is_finite() && (0.0..=1.0).contains(&r.value), "{r:?}");
    }
}

#[test]
fn summary_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_experiment(&small(), dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let stored: Vec<SummaryCell> = serde_json::from_str(&text).unwrap();
    assert_eq!(stored, summarize(&rep.rows));
    let cell = stored
        .iter()
        .find(|c| c.attack == "tamis-mst" && c.setting == "aux-individuals" && c.metric == "auroc")
        .unwrap();
    let v: Vec<f64> = rep
        .rows
        .iter()
        .filter(|r| r.attack == "tamis-mst" && r.setting == "aux-individuals" && r.metric == "auroc")
        .map(|r| r.value)
        .collect();
    assert_eq!(cell.n, 2);
    let mean = (v[0] + v[1]) / 2.0;
    assert!((cell.mean - mean).abs() < 1e-15);
    assert!((cell.std - (v[0] - v[1]).abs() / 2f64.sqrt()).abs() < 1e-12);
    assert!((cell.median - mean).abs() < 1e-15);
}

#[test]
fn unknown_attack_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.attacks = vec!["nope".into()];
    assert!(run_experiment(&cfg, dir.path()).is_err());
    assert!(ExperimentConfig::from_json(r#"{"replicas": 0}"#).is_err());
    let cfg = ExperimentConfig::from_json(r#"{"epsilons": ["inf", 2]}"#).unwrap();
    assert_eq!(cfg.epsilons, vec![f64::INFINITY, 2.0]);
}
