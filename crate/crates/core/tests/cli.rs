mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn dialfact(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dialfact"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DIALFACT_REGISTRY")
        .output()
        .expect("binary runs")
}

fn corpus_arg() -> String {
    fixture("corpus.jsonl").display().to_string()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dialfact(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(dialfact(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(dialfact(&["detect"], dir.path()).status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.jsonl").display().to_string();
    let c = corpus_arg();
    let missing = dialfact(&["stats", "--corpus", "nope.jsonl"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let bad_scorer = dialfact(&["detect", "--corpus", &c, "--scorer", "gpt9", "--out", &out], dir.path());
    assert_eq!(bad_scorer.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_scorer.stderr).contains("gpt9"));

    let zero_t = dialfact(&["detect", "--corpus", &c, "--T", "0", "--out", &out], dir.path());
    assert_eq!(zero_t.status.code(), Some(2));
    assert!(!Path::new(&out).exists());

    let no_detectors = dialfact(&["crossval", "--corpus", &c], dir.path());
    assert_eq!(no_detectors.status.code(), Some(2));

    let bad_k = dialfact(&["crossval", "--corpus", &c, "--ranker", "mock", "--k", "1"], dir.path());
    assert_eq!(bad_k.status.code(), Some(2));
}

#[test]
fn stats_reports_fixture_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stats.json");
    let o = dialfact(&["stats", "--corpus", &corpus_arg(), "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(v["example_count"], 60);
    assert!(String::from_utf8_lossy(&o.stdout).contains("EntE"));
}

#[test]
fn detect_evaluate_and_ensembles_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();
    let c = corpus_arg();
    for (name, scorer) in [("mock.jsonl", "mock"), ("overlap.jsonl", "overlap")] {
        let o = dialfact(&["detect", "--corpus", &c, "--scorer", scorer, "--T", "2", "--out", &p(name)], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let lines = std::fs::read_to_string(p("mock.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 60);

    let e = dialfact(&["evaluate", "--corpus", &c, "--predictions", &p("mock.jsonl"), "--out", &p("eval.json")], dir.path());
    assert!(e.status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(p("eval.json")).unwrap()).unwrap();
    let macro_f1 = report["macro_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&macro_f1));

    let preds = [format!("A={}", p("mock.jsonl")), format!("B={}", p("overlap.jsonl"))];
    let freq = dialfact(
        &["ensemble", "freq", "--corpus", &c, "--predictions", &preds[0], "--predictions", &preds[1], "--out", &p("vote.jsonl")],
        dir.path(),
    );
    assert!(freq.status.success());
    assert_eq!(std::fs::read_to_string(p("vote.jsonl")).unwrap().lines().count(), 60);

    let fit = dialfact(
        &["ensemble", "fit", "--corpus", &c, "--predictions", &preds[0], "--predictions", &preds[1], "--out", &p("model.json")],
        dir.path(),
    );
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let predict = dialfact(
        &[
            "ensemble", "predict", "--corpus", &c, "--predictions", &preds[0], "--predictions", &preds[1], "--model",
            &p("model.json"), "--out", &p("logit.jsonl"),
        ],
        dir.path(),
    );
    assert!(predict.status.success());

    // Detector order is part of the model.
    let swapped = dialfact(
        &[
            "ensemble", "predict", "--corpus", &c, "--predictions", &format!("B={}", p("overlap.jsonl")), "--predictions",
            &format!("A={}", p("mock.jsonl")), "--model", &p("model.json"), "--out", &p("x.jsonl"),
        ],
        dir.path(),
    );
    assert_eq!(swapped.status.code(), Some(2));
}

#[test]
fn tune_prints_landscape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tune.json");
    let o = dialfact(&["tune", "--corpus", &corpus_arg(), "--grid", "1,2,3", "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(v["landscape"].as_array().unwrap().len(), 3);

    let qa = dialfact(&["tune", "--corpus", &corpus_arg(), "--qa", fixture("qa.jsonl").to_str().unwrap()], dir.path());
    assert!(qa.status.success());
    let text = String::from_utf8_lossy(&qa.stdout);
    assert_eq!(text.lines().count(), 5, "{text}");
}

#[test]
fn corrupt_writes_a_loadable_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synthetic.jsonl");
    let o = dialfact(&["corrupt", "--corpus", &corpus_arg(), "--per-class", "4", "--seed", "3", "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = dialfact::dataset::load_corpus(&out).unwrap();
    let synthetic = c.examples.iter().filter(|e| e.sentence.model_id == "synthetic").count();
    assert_eq!(synthetic, 24);
}

#[test]
fn registry_from_env_and_default_file() {
    let dir = tempfile::tempdir().unwrap();
    let reg = r#"{"scorers": {"seed5": {"kind": "mock", "seed": 5}}}"#;
    std::fs::write(dir.path().join("dialfact-registry.json"), reg).unwrap();
    let c = corpus_arg();
    let run = |extra: &[(&str, &str)], out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dialfact"));
        cmd.args(["detect", "--corpus", &c, "--scorer", "seed5", "--out", out]).current_dir(dir.path()).env_remove("DIALFACT_REGISTRY");
        for (k, v) in extra {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    };
    assert!(run(&[], "a.jsonl").status.success());

    let elsewhere = tempfile::tempdir().unwrap();
    let path = elsewhere.path().join("r.json");
    std::fs::write(&path, r#"{"scorers": {"other": {"kind": "overlap"}}}"#).unwrap();
    // The environment wins over the default file.
    let o = run(&[("DIALFACT_REGISTRY", path.to_str().unwrap())], "b.jsonl");
    assert_eq!(o.status.code(), Some(2));

    let broken = elsewhere.path().join("broken.json");
    std::fs::write(&broken, "{not json").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dialfact"))
        .args(["--registry", broken.to_str().unwrap(), "detect", "--corpus", &c, "--out", "c.jsonl"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
