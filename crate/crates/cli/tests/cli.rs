use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use delayprop::commands::{answer, QueryBody};
use delayprop_core::json::to_canonical;
use delayprop_core::Network;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delayprop"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--config", &p(dir.path(), "missing.json"), "--cases", "x.csv", "--out", "y.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["train"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    fs::write(dir.path().join("bad.json"), "{").unwrap();
    fs::write(dir.path().join("cases.csv"), "a\n1\n").unwrap();
    let out = run(&["train", "--config", &p(dir.path(), "bad.json"), "--cases", &p(dir.path(), "cases.csv"), "--out", &p(dir.path(), "m.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--n", "1000", "--seed", "7", "--out", &p(d, "a.csv")]);
    ok(&["simulate", "--n", "1000", "--seed", "7", "--out", &p(d, "b.csv")]);
    let a = fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 2001);
}

#[test]
fn pipeline_sweep_rows_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--n", "400", "--seed", "3", "--out", &p(d, "rec.csv"), "--config-out", &p(d, "cfg.json")]);
    ok(&["ingest", "--records", &p(d, "rec.csv"), "--out", &p(d, "cases.csv"), "--origin", "ORD"]);
    ok(&["fit", "--config", &p(d, "cfg.json"), "--cases", &p(d, "cases.csv"), "--out", &p(d, "fit.json")]);
    ok(&["train", "--config", &p(d, "fit.json"), "--cases", &p(d, "cases.csv"), "--out", &p(d, "model.json")]);
    ok(&["eval", "--model", &p(d, "model.json"), "--cases", &p(d, "cases.csv"), "--out", &p(d, "eval.json"), "--ll-samples", "200"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("eval.json")).unwrap()).unwrap();
    assert!(report["log_likelihood"]["ks_statistic"].as_f64().unwrap() <= 1.0);

    ok(&[
        "eval", "--weights", "1,30,300", "--config", &p(d, "cfg.json"), "--train", &p(d, "cases.csv"),
        "--cases", &p(d, "cases.csv"), "--out", &p(d, "sweep.csv"),
    ]);
    let text = fs::read_to_string(d.join("sweep.csv")).unwrap();
    let net: Network = Network::from_document(serde_json::from_slice(&fs::read(d.join("model.json")).unwrap()).unwrap()).unwrap();
    let binned: Vec<&str> = net.binned_nodes().into_iter().map(|i| net.name(i)).collect();
    for node in &binned {
        assert_eq!(text.lines().filter(|l| l.split(',').next() == Some(node)).count(), 3, "{node}");
    }
    assert_eq!(text.lines().count(), 1 + 3 * binned.len());

    let evidence = r#"{"gate_in_dest":["[15,30)"]}"#;
    let out = run(&["query", "--model", &p(d, "model.json"), "--evidence", evidence]);
    assert!(out.status.success());
    let body = QueryBody { evidence: serde_json::from_str(evidence).unwrap(), query: vec![] };
    let direct = to_canonical(&answer(&net, &body).unwrap()).unwrap() + "\n";
    assert_eq!(String::from_utf8(out.stdout).unwrap(), direct);

    let out = run(&["query", "--model", &p(d, "model.json"), "--evidence", r#"{"nope":[0]}"#]);
    assert_eq!(out.status.code(), Some(2));
}
