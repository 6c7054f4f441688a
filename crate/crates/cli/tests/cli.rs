use std::process::{Command, Output};

use serde_json::Value;

fn elfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elfs")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn without_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn same_seed_same_document() {
    let args = ["arrival-compare", "--gen", "random_graph:10,0.3,0.1,10", "--sink", "9", "--seed", "7", "--replicas", "2000"];
    let a = elfs(&args);
    let b = elfs(&args);
    assert!(a.status.success());
    assert_eq!(without_timestamp(json(&a)), without_timestamp(json(&b)));
}

#[test]
fn thread_count_does_not_change_results() {
    let base = ["elfs-eht", "--gen", "cycle:8", "--sink", "4", "--seed", "3", "--replicas", "3000"];
    let one = elfs(&[&base[..], &["--threads", "1"]].concat());
    let two = elfs(&[&base[..], &["--threads", "2"]].concat());
    assert_eq!(without_timestamp(json(&one)), without_timestamp(json(&two)));
}

#[test]
fn path_eht_document() {
    let out = elfs(&["elfs-eht", "--gen", "path:64", "--source", "0", "--sink", "63"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_eq!(doc["experiment"], "elfs-eht");
    assert_eq!(doc["pass"], true);
    for key in ["anchor", "parameters", "seed", "metrics", "checks", "timestamp"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert!(doc["anchor"].as_str().unwrap().len() > 10);
    assert_eq!(doc["parameters"]["n"], 64);
}

#[test]
fn flowstate_on_path() {
    let out = elfs(&["qw-flowstate", "--gen", "path:3", "--eps", "0.1", "--seed", "7"]);
    assert!(out.status.success());
    let doc = json(&out);
    let p = doc["metrics"]["p_prime"].as_f64().unwrap();
    assert!((p - 0.5).abs() < 0.01, "{p}");
    assert!(doc["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn bad_input_exits_2() {
    assert_eq!(elfs(&["electric-solve", "--gen", "path:4", "--sink", "0"]).status.code(), Some(2));
    assert_eq!(elfs(&["graph-info", "--gen", "nonsense:4"]).status.code(), Some(2));
    assert_eq!(elfs(&["graph-info", "--gen", "path:4", "--sink", "x"]).status.code(), Some(2));
    assert_eq!(elfs(&["graph-info"]).status.code(), Some(2));
    assert_eq!(elfs(&["no-such-experiment", "--gen", "path:4"]).status.code(), Some(2));
}

#[test]
fn missing_file_exits_3() {
    let out = elfs(&["graph-info", "--graph", "/nonexistent/graph.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn graph_file_input_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    std::fs::write(&graph, r#"{"n": 4, "edges": [[0, 1, 1.0], [1, 2, 2.0], [2, 3, 0.5], [3, 0, 1.0]]}"#).unwrap();
    let out_path = dir.path().join("out.json");
    let out = elfs(&["electric-solve", "--graph", graph.to_str().unwrap(), "--sink", "2", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["parameters"]["n"], 4);
    assert_eq!(doc["pass"], true);
}

#[test]
fn csv_output() {
    let out = elfs(&["elfs-eht", "--gen", "path:5", "--sink", "4", "--replicas", "50", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 51);
    let cols = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == cols));

    let out = elfs(&["qw-resistance", "--gen", "path:5", "--sink", "4", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("metric,value\n"));
}

#[test]
fn every_experiment_runs() {
    let general = [
        "graph-info",
        "electric-solve",
        "elfs-eht",
        "arrival-compare",
        "identities",
        "coupling-vertex",
        "coupling-edge",
        "escape-time",
        "doob",
        "estimate-rd",
        "complete-graph-scan",
        "schur-check",
        "qw-invariants",
        "qw-flowstate",
        "qw-eta",
        "qw-elfs",
        "qw-search",
        "qw-resistance",
    ];
    for exp in general {
        let out = elfs(&[exp, "--gen", "cycle:6", "--sink", "3", "--seed", "1", "--replicas", "2000"]);
        assert!(out.status.success(), "{exp}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&out)["experiment"], exp);
    }
    for (exp, source) in [("pba", "2"), ("tree-recurrence", "1"), ("tree-bound", "1")] {
        let out = elfs(&[exp, "--gen", "path:5", "--source", source, "--seed", "1"]);
        assert!(out.status.success(), "{exp}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn tree_experiment_rejects_cycle() {
    assert_eq!(elfs(&["tree-bound", "--gen", "cycle:5", "--sink", "2"]).status.code(), Some(2));
}
