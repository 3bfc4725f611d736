use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rdslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdslab")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = rdslab(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a block network (E = F = H = 60, 30 nodes per cell) into `dir`.
fn block_files(dir: &Path) -> (String, String) {
    let edges = dir.join("block.edges");
    let attrs = dir.join("block.csv");
    let out = rdslab(&[
        "synth", "block", "--e", "60", "--f", "60", "--h", "60", "--cell-size", "30", "--seed", "4", "--edges",
        s(&edges), "--attributes", s(&attrs),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (edges.to_str().unwrap().into(), attrs.to_str().unwrap().into())
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&rdslab(&[])), 1);
    assert_eq!(code(&rdslab(&["frobnicate"])), 1);
    assert_eq!(code(&rdslab(&["exact"])), 1, "no input source");
    assert_eq!(code(&rdslab(&["exact", "--block", "10,10"])), 1);
    assert_eq!(code(&rdslab(&["fomtest", "--level", "sample", "--attribute", "Y"])), 1);
    assert!(rdslab(&["--help"]).status.success());
    assert!(rdslab(&["--version"]).status.success());
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.edges");
    let out = rdslab(&["sample", "--edges", s(&missing)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.edges"));

    let bad = dir.path().join("bad.edges");
    fs::write(&bad, "a b\nc\n").unwrap();
    let out = rdslab(&["cohesion", "--edges", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"), "error names the line");

    let (edges, attrs) = block_files(dir.path());
    let out = rdslab(&["fomtest", "--level", "network", "--attribute", "Q", "--edges", &edges, "--attributes", &attrs]);
    assert_eq!(code(&out), 2);
}

#[test]
fn numerical_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("reducible.json");
    fs::write(&chain, r#"{"matrix": [[1.0, 0.0], [0.0, 1.0]], "values": [0.0, 1.0]}"#).unwrap();
    assert_eq!(code(&rdslab(&["exact", "--chain", s(&chain)])), 3);
}

#[test]
fn chain_report_matches_two_state_identities() {
    let v = ok_json(&["synth", "chain", "--e", "10", "--f", "10", "--h", "10", "--size", "100"]);
    let c = &v["category_chain"];
    let trace = c[0][0].as_f64().unwrap() + c[1][1].as_f64().unwrap();
    // A 2x2 stochastic matrix has eigenvalues 1 and trace - 1.
    let lambda = v["category_eigenvalues"][1].as_f64().unwrap();
    assert!((lambda - (trace - 1.0)).abs() < 1e-12);
    assert!((lambda - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["cell_chain"].as_array().unwrap().len(), 4);
    for row in v["cell_chain"].as_array().unwrap() {
        let sum: f64 = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
    let exact = v["exact"].as_array().unwrap();
    assert_eq!(exact.len(), 2);
    assert!(exact[0]["variance"].as_f64().unwrap() > exact[1]["variance"].as_f64().unwrap());
}

#[test]
fn exact_agrees_across_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let block = ok_json(&["exact", "--block", "10,10,10", "--size", "100"]);
    let category = &block[1];
    assert_eq!(category["label"], "category-chain");

    // The same 2-state chain typed in by hand.
    let p = 1.0 / 6.0;
    let chain = dir.path().join("c.json");
    fs::write(&chain, format!(r#"{{"matrix": [[{}, {p}], [{p}, {}]], "values": [0, 1]}}"#, 1.0 - p, 1.0 - p)).unwrap();
    let typed = ok_json(&["exact", "--chain", s(&chain), "--size", "100"]);
    let a = category["variance"].as_f64().unwrap();
    let b = typed["variance"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-12 * a, "{a} vs {b}");
    // Lag sum by hand: gamma_t = (1/4)(2/3)^t.
    let mut oracle = 0.25;
    for t in 1..100 {
        oracle += 2.0 * (1.0 - t as f64 / 100.0) * 0.25 * (2.0f64 / 3.0).powi(t);
    }
    oracle /= 100.0;
    assert!((a - oracle).abs() < 1e-12, "{a} vs {oracle}");

    // A non-reversible chain still gets a variance, without eigenvalues.
    fs::write(&chain, r#"{"matrix": [[0, 0.9, 0.1], [0.1, 0, 0.9], [0.9, 0.1, 0]], "values": [1, 0, 0]}"#).unwrap();
    let nr = ok_json(&["exact", "--chain", s(&chain), "--size", "50"]);
    assert!(nr["eigenvalues"].is_null());
    assert!(nr["variance"].as_f64().unwrap() > 0.0);

    let (edges, attrs) = block_files(dir.path());
    let g = ok_json(&["exact", "--edges", &edges, "--attributes", &attrs, "--attribute", "Y", "--size", "100"]);
    assert_eq!(g["states"], 120);
    assert!((g["mean"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn sample_estimate_and_test_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, attrs) = block_files(dir.path());
    let forest = dir.path().join("forest.csv");
    let args = ["sample", "--edges", &edges, "--attributes", &attrs, "--size", "80", "--seed", "9"];
    let out = rdslab(&[&args[..], &["--out", s(&forest)]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&forest).unwrap();
    assert!(text.starts_with("sample_index,node_id,parent_index,tree_id,wave,degree,Y,Z\n"));
    assert_eq!(text.lines().count(), 81);
    let to_stdout = rdslab(&args);
    assert_eq!(String::from_utf8(to_stdout.stdout).unwrap(), text, "seeded runs repeat");

    let v = ok_json(&["estimate", "--forest", s(&forest), "--attribute", "Y", "--bootstrap", "50"]);
    assert_eq!(v["records"], 80);
    let estimates = v["estimates"].as_array().unwrap();
    let names: Vec<&str> = estimates.iter().map(|e| e["estimator"].as_str().unwrap()).collect();
    assert_eq!(names, ["vhe", "vhewbc", "vhehom2", "vhehom3", "sbe"]);
    let mean = v["mean"].as_f64().unwrap();
    for (e, iv) in estimates.iter().zip(v["intervals"].as_array().unwrap()) {
        let var = e["variance"].as_f64().unwrap();
        assert!(var >= 0.0);
        let half = 1.96 * var.sqrt();
        assert!((iv[1][0].as_f64().unwrap() - (mean - half)).abs() < 1e-12);
        assert!((iv[1][1].as_f64().unwrap() - (mean + half)).abs() < 1e-12);
    }
    let single = ok_json(&["estimate", "--forest", s(&forest), "--attribute", "Y", "--estimator", "vhe"]);
    assert_eq!(single["estimates"].as_array().unwrap().len(), 1);
    assert_eq!(single["estimates"][0]["variance"], estimates[0]["variance"]);

    let t = ok_json(&["fomtest", "--level", "sample", "--attribute", "Y", "--forest", s(&forest)]);
    assert_eq!(t["level"], "sample");
    assert_eq!(t["coefficients"].as_array().unwrap().len(), 4);
    let n = ok_json(&["fomtest", "--level", "network", "--attribute", "Y", "--edges", &edges, "--attributes", &attrs, "--alpha", "0.01"]);
    assert_eq!(n["level"], "network");
    assert_eq!(n["alpha"], 0.01);
    let verdict = n["verdict"].as_str().unwrap();
    assert!(["not-fom", "may-be-fom", "inconclusive"].contains(&verdict), "{verdict}");

    let walk = dir.path().join("walk.csv");
    assert!(rdslab(&["sample", "--edges", &edges, "--walk", "--size", "30", "--out", s(&walk)]).status.success());
    let rows: Vec<String> = fs::read_to_string(&walk).unwrap().lines().skip(1).map(String::from).collect();
    for (i, row) in rows.iter().enumerate() {
        let parent = row.split(',').nth(2).unwrap();
        assert_eq!(parent, if i == 0 { String::new() } else { (i - 1).to_string() });
    }
}

#[test]
fn contrast_and_cohesion() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("pair");
    let out = rdslab(&["synth", "contrast", "--group-size", "40", "--degree", "6", "--out-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["fom.edges", "fom.csv", "nonfom.edges", "nonfom.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let fom = fs::read_to_string(out_dir.join("fom.edges")).unwrap();
    let nonfom = fs::read_to_string(out_dir.join("nonfom.edges")).unwrap();
    let edge_lines = |text: &str| text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(edge_lines(&fom), 80 * 6 / 2);
    assert_eq!(edge_lines(&nonfom), 80 * 6 / 2);

    let k4 = dir.path().join("k4.edges");
    fs::write(&k4, "a b\na c\na d\nb c\nb d\nc d\n").unwrap();
    let v = ok_json(&["cohesion", "--edges", s(&k4)]);
    assert_eq!(v["exhaustive"], true);
    assert_eq!(v["dyads"], 6);
    assert_eq!(v["mean"], 3.0);
    assert_eq!((v["min"].as_u64(), v["max"].as_u64()), (Some(3), Some(3)));
    let sampled = ok_json(&["cohesion", "--edges", &out_dir.join("fom.edges").to_string_lossy(), "--dyads", "50", "--seed", "1"]);
    assert_eq!(sampled["exhaustive"], false);
    assert_eq!(sampled["dyads"], 50);
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        r#"
replications = 4
estimators = ["vhe", "vhewbc"]
master_seed = 3
[rds]
sample_size = 40
[[networks]]
name = "b"
kind = "block"
d = 40
e = 20
f = 20
h = 20
cell_size = 20
[[networks]]
name = "gone"
kind = "file"
edges = "missing.edges"
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("report");
    let out = rdslab(&["experiment", "--config", s(&config), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gone"), "failed network is reported");
    for f in ["summary.csv", "strata.csv", "replications.csv", "manifest.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["report"]["cells"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["report"]["failures"][0]["network"], "gone");

    fs::write(&config, "replications = 1\n").unwrap();
    assert_eq!(code(&rdslab(&["experiment", "--config", s(&config), "--out", s(&out_dir)])), 2);
}
