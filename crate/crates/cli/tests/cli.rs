use std::path::Path;
use std::process::{Command, Output};

fn synthmia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synthmia")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = synthmia(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(text.trim()).expect("stderr is one JSON object");
    assert!(v["error"].is_string() && v["message"].is_string());
    v
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("pop.json");
    std::fs::write(&spec, r#"{"n_rows": 1500, "n_attributes": 4, "max_cardinality": 3}"#).unwrap();
    let aux = d.join("aux.csv");
    ok(&["simulate", "--config", s(&spec), "--seed", "5", "--out", s(&aux)]);

    let gen = d.join("gen");
    ok(&["generate", "--data", s(&aux), "--method", "mst", "--epsilon", "10", "--seed", "1", "--out", s(&gen)]);
    for f in ["synth.csv", "model.json", "domain.json"] {
        assert!(gen.join(f).exists());
    }
    let synth = gen.join("synth.csv");
    let tree = d.join("tree.json");
    ok(&["recover", "--synth", s(&synth), "--method", "mst", "--out", s(&tree)]);
    let weights = d.join("weights.json");
    ok(&["shadow", "--aux", s(&aux), "--method", "mst", "--runs", "3", "--subset-size", "500", "--out", s(&weights)]);
    let w: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&weights).unwrap()).unwrap();
    assert_eq!(w["runs"], 3);

    // label the first half of the records as members
    let text = std::fs::read_to_string(&aux).unwrap();
    let mut lines = text.lines();
    let mut labelled = format!("{},__member__\n", lines.next().unwrap());
    for (i, l) in lines.enumerate() {
        labelled += &format!("{l},{}\n", u8::from(i < 750));
    }
    let targets = d.join("targets.csv");
    std::fs::write(&targets, labelled).unwrap();

    for (attack, extra) in [
        ("tamis-mst", vec!["--structure", s(&tree)]),
        ("mamamia-mst", vec!["--weights", s(&weights)]),
        ("hybrid-mst", vec!["--structure", s(&tree), "--prior", "0.5"]),
        ("marginals-sigma", vec![]),
    ] {
        let scores = d.join(format!("{attack}.csv"));
        let mut args = vec!["attack", "--attack", attack, "--synth", s(&synth), "--aux", s(&aux)];
        args.extend(["--targets", s(&targets), "--out", s(&scores)]);
        args.extend(extra);
        ok(&args);
        let out = ok(&["evaluate", "--scores", s(&scores)]);
        let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(m["n"], 1500);
        let a = m["auroc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&a));
    }

    let cfg = d.join("exp.json");
    std::fs::write(
        &cfg,
        r#"{"replicas": 1, "shadow_runs": 2,
            "aux": {"population": {"n_rows": 1500, "n_attributes": 4, "max_cardinality": 3}},
            "split": {"n_target_households": 10, "min_household_size": 5, "train_size": 300,
                      "member_fraction_of_households": 0.5, "seed": 0}}"#,
    )
    .unwrap();
    let exp = d.join("exp");
    ok(&[
        "replicate", "--config", s(&cfg), "--seed", "2", "--epsilon", "inf", "--method", "mst",
        "--attack", "tamis-mst", "--out", s(&exp),
    ]);
    let metrics = std::fs::read_to_string(exp.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("generator,epsilon,replica,attack,setting,metric,value"));
    assert!(metrics.contains("mst,inf,0,tamis-mst,target-households,auroc,"));
    // a second call resumes
    let again = ok(&[
        "replicate", "--config", s(&cfg), "--seed", "2", "--epsilon", "inf", "--method", "mst",
        "--attack", "tamis-mst", "--out", s(&exp),
    ]);
    assert!(String::from_utf8_lossy(&again.stderr).contains("(1 resumed)"));
    // a different seed conflicts with the stored configuration
    let clash = synthmia(&[
        "replicate", "--config", s(&cfg), "--seed", "3", "--epsilon", "inf", "--method", "mst",
        "--attack", "tamis-mst", "--out", s(&exp),
    ]);
    assert_eq!(error_json(&clash)["error"], "config_mismatch");
}

#[test]
fn errors_are_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = synthmia(&["generate", "--data", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    error_json(&out);

    let out = synthmia(&["replicate", "--epsilon=0", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    error_json(&out);

    let out = synthmia(&["attack", "--attack", "nope", "--synth", "a", "--aux", "b", "--targets", "c", "--out", "d"]);
    error_json(&out);

    let out = synthmia(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "usage");
}

#[test]
fn help_still_works() {
    let out = synthmia(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("replicate"));
}
