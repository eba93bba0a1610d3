use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use wcexplain::dataset::{recipes_schema, save_items, FeatureSpec, Item, Schema};

const TRUTH: &str = ":~ value(a,V1).[V1@2, V1]\n:~ value(b,V1).[-V1@1, V1]\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wcexplain"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

/// Three integer features (one rated), 30 items and a theory oracle.
fn world() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let mut a = FeatureSpec::ordinal("a", 0, 9);
    a.gt_rating = Some(3);
    let schema = Schema::new("toy", vec![a, FeatureSpec::ordinal("b", 0, 9), FeatureSpec::ordinal("c", 0, 9)]).unwrap();
    schema.save(dir.path().join("schema.json")).unwrap();
    let items: Vec<Item> = (0..30u32)
        .map(|i| {
            let v = [f64::from(i % 10), f64::from((i * 7 + 3) % 10), f64::from((i * 3 + 1) % 10)];
            Item::from_vector(i, &format!("item{i}"), &schema, &v)
        })
        .collect();
    save_items(dir.path().join("items.csv"), &schema, &items).unwrap();
    let spec = serde_json::json!({
        "kind": "theory",
        "theory": TRUTH,
        "feature_names": ["a", "b", "c"],
    });
    fs::write(dir.path().join("oracle.json"), spec.to_string()).unwrap();
    dir
}

const DATA: [&str; 4] = ["--schema", "schema.json", "--items", "items.csv"];

fn with_data<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(DATA.iter()).chain(tail).copied().collect()
}

#[test]
fn sampling_requires_a_seed() {
    let w = world();
    let out = run(w.path(), &with_data(&["sample", "global"], &["--out-dir", "s"]));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    let out = run(w.path(), &with_data(&["sample", "local"], &["--out-dir", "s"]));
    assert!(!out.status.success());
}

#[test]
fn global_sample_is_deterministic() {
    let w = world();
    for dir in ["s1", "s2"] {
        ok(
            w.path(),
            &with_data(&["sample", "global"], &["--n-train", "10", "--n-test", "5", "--seed", "4", "--out-dir", dir]),
        );
    }
    let a = fs::read_to_string(w.path().join("s1/train.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(w.path().join("s2/train.csv")).unwrap());
    assert_eq!(a.lines().count(), 11);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(w.path().join("s1/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["test"], 5);
}

#[test]
fn local_sample_writes_neighbourhoods() {
    let w = world();
    ok(
        w.path(),
        &with_data(
            &["sample", "local"],
            &["--queries", "3", "--m", "5", "--sigma", "0.1", "--seed", "1", "--out-dir", "loc"],
        ),
    );
    let hoods: Value = serde_json::from_str(&fs::read_to_string(w.path().join("loc/neighbourhoods.json")).unwrap()).unwrap();
    let hoods = hoods.as_array().unwrap();
    assert_eq!(hoods.len(), 3);
    assert_eq!(hoods[0]["neighbourhood"]["samples"].as_array().unwrap().len(), 5);
    assert_eq!(hoods[0]["penalties"].as_array().unwrap().len(), 5);
}

fn learn_global(w: &Path, out: &str, extra: &[&str]) -> Value {
    let mut args = vec![
        "learn", "global", "--schema", "schema.json", "--items", "items.csv", "--oracle", "oracle.json", "--seed", "7",
        "--n-train", "20", "--n-test", "30", "--maxp", "2", "--out-dir", out,
    ];
    args.extend(extra);
    ok(w, &args)
}

#[test]
fn global_run_is_reproducible_and_recomputable() {
    let w = world();
    let first = learn_global(w.path(), "g1", &[]);
    let second = learn_global(w.path(), "g2", &[]);
    assert_eq!(first["theory"], second["theory"]);
    assert!(w.path().join("g1/theory.lp").exists());
    let csv = fs::read_to_string(w.path().join("g1/metrics.csv")).unwrap();
    assert!(csv.starts_with("Run,Fidelity,Precision_BB,Recall_BB,Time(s),#WC"));

    let eval = ok(w.path(), &["eval", "--manifest", "g1/manifest.json"]);
    assert_eq!(eval["matches_stored"], true);

    let gt = ok(w.path(), &["gt-score", "--manifest", "g1/manifest.json"]);
    assert!(gt["scores"]["accuracy"].as_f64().unwrap() >= 0.0);

    ok(w.path(), &["report", "--out-dir", "rep1", "g1/manifest.json"]);
    assert!(!w.path().join("rep1/deltas.csv").exists());
    let rep = ok(w.path(), &["report", "--out-dir", "rep2", "g1/manifest.json", "g2/manifest.json"]);
    assert_eq!(rep["deltas"], 1);
    let deltas = fs::read_to_string(w.path().join("rep2/deltas.csv")).unwrap();
    assert_eq!(deltas.lines().count(), 2);
    assert!(fs::read_to_string(w.path().join("rep2/theories.lp")).unwrap().contains(":~"));
}

#[test]
fn config_file_with_flag_overrides() {
    let w = world();
    let config = serde_json::json!({
        "mode": "global",
        "schema": "schema.json",
        "items": "items.csv",
        "oracle": {"kind": "theory", "theory": TRUTH, "feature_names": ["a", "b", "c"]},
        "global": {"n_train": 20, "n_test": 30},
        "bias": {"maxp": 2},
        "seed": 7
    });
    fs::write(w.path().join("config.json"), config.to_string()).unwrap();
    let from_file = ok(w.path(), &["learn", "global", "--config", "config.json", "--out-dir", "c1"]);
    let from_flags = learn_global(w.path(), "c2", &[]);
    assert_eq!(from_file["theory"], from_flags["theory"]);
    let other_seed = ok(w.path(), &["learn", "global", "--config", "config.json", "--seed", "8", "--out-dir", "c3"]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(w.path().join("c3/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 8);
    assert!(other_seed["row"]["Fidelity"].is_number());
}

#[test]
fn direct_pca_run_records_retro_projection() {
    let w = world();
    learn_global(w.path(), "d", &["--pca", "direct:2:10:2"]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(w.path().join("d/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["features"], serde_json::json!(["pc1", "pc2"]));
    assert_eq!(manifest["reduction"]["mode"], "direct");
}

#[test]
fn label_then_export_ilasp() {
    let w = world();
    ok(
        w.path(),
        &with_data(&["sample", "global"], &["--n-train", "20", "--n-test", "10", "--seed", "2", "--out-dir", "s"]),
    );
    let counts = ok(
        w.path(),
        &with_data(&["oracle", "label"], &["--pairs", "s/train.csv", "--oracle", "oracle.json", "--out", "labeled.csv"]),
    );
    assert_eq!(counts["pairs"], 20);
    let labeled = fs::read_to_string(w.path().join("labeled.csv")).unwrap();
    assert!(labeled.lines().skip(1).all(|l| !l.ends_with(',')));

    let text = run(w.path(), &with_data(&["export-ilasp"], &["--pairs", "labeled.csv", "--maxp", "2", "--task-out", "task.json"]));
    assert!(text.status.success());
    let text = String::from_utf8(text.stdout).unwrap();
    assert_eq!(text.matches("#brave_ordering(").count(), 20);
    assert!(text.contains("#maxp(2)."));
    let again = ok(w.path(), &["export-ilasp", "--task", "task.json", "--out", "task.las"]);
    assert!(again.is_null());
    assert_eq!(fs::read_to_string(w.path().join("task.las")).unwrap(), text);
}

#[test]
fn eval_of_the_truth_is_perfect() {
    let w = world();
    fs::write(w.path().join("truth.lp"), TRUTH).unwrap();
    ok(
        w.path(),
        &with_data(&["sample", "global"], &["--n-train", "25", "--n-test", "1", "--seed", "3", "--out-dir", "s"]),
    );
    ok(
        w.path(),
        &with_data(&["oracle", "label"], &["--pairs", "s/train.csv", "--oracle", "oracle.json", "--out", "labeled.csv"]),
    );
    let report = ok(w.path(), &with_data(&["eval"], &["--theory", "truth.lp", "--pairs", "labeled.csv"]));
    assert_eq!(report["fidelity"], 1.0);
    assert_eq!(report["pairs"], 25);

    let gt = ok(w.path(), &with_data(&["gt-score"], &["--theory", "truth.lp", "--pairs", "labeled.csv", "--rating", "b=7"]));
    assert_eq!(gt["records"].as_array().unwrap().len(), 2);
    assert_eq!(gt["records"][1]["m"], -3);

    let mut users = String::from("user,id1,id2,label\n");
    for line in fs::read_to_string(w.path().join("labeled.csv")).unwrap().lines().skip(1) {
        users.push_str(&line.replacen("sample", "u1", 1));
        users.push('\n');
    }
    fs::write(w.path().join("users.csv"), users).unwrap();
    let class = ok(
        w.path(),
        &[
            "learn", "classifier", "--schema", "schema.json", "--items", "items.csv", "--pairs", "users.csv", "--seed", "0",
            "--n-train", "18", "--maxp", "2", "--out-dir", "cls",
        ],
    );
    assert!(class["row"]["Fidelity"].as_f64().unwrap() >= 0.0);
}

#[test]
fn local_run_and_aggregate_report() {
    let w = world();
    let out = ok(
        w.path(),
        &[
            "learn", "local", "--schema", "schema.json", "--items", "items.csv", "--oracle", "oracle.json", "--seed", "5",
            "--queries", "3", "--m", "12", "--sigma", "0.1", "--maxp", "2", "--out-dir", "loc",
        ],
    );
    assert_eq!(out["queries"], 3);
    let csv = fs::read_to_string(w.path().join("loc/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let rep = ok(w.path(), &["report", "--aggregate", "--out-dir", "rep", "loc/local_run.json"]);
    assert_eq!(rep["runs"], 1);
}

#[test]
fn pca_fit_select_project() {
    let w = world();
    let fit = ok(w.path(), &with_data(&["pca", "fit"], &["--out", "pca.json"]));
    assert_eq!(fit["features"], 3);
    let ratios: f64 = fit["explained_variance_ratio"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((ratios - 1.0).abs() < 1e-9);
    let sel = ok(w.path(), &["pca", "select", "--model", "pca.json", "--n", "1"]);
    assert_eq!(sel["mode"], "indirect");
    assert_eq!(sel["n_components"], 1);
    ok(
        w.path(),
        &with_data(&["pca", "project", "--model", "pca.json"], &["--k", "2", "--factor", "10", "--out", "scores.csv"]),
    );
    let scores = fs::read_to_string(w.path().join("scores.csv")).unwrap();
    assert!(scores.starts_with("id,pc1,pc2"));
    assert_eq!(scores.lines().count(), 31);
}

#[test]
fn mmd_of_a_table_with_itself_is_zero() {
    let w = world();
    let same = ok(w.path(), &["mmd", "--a", "items.csv", "--b", "items.csv"]);
    assert!(same["mmd"].as_f64().unwrap().abs() < 0.05);
    assert_eq!(same["n_a"], 30);
}

#[test]
fn train_and_use_the_reference_network() {
    let w = world();
    ok(
        w.path(),
        &with_data(&["sample", "global"], &["--n-train", "30", "--n-test", "1", "--seed", "9", "--out-dir", "s"]),
    );
    ok(
        w.path(),
        &with_data(&["oracle", "label"], &["--pairs", "s/train.csv", "--oracle", "oracle.json", "--out", "labeled.csv"]),
    );
    let trained = ok(
        w.path(),
        &with_data(
            &["oracle", "train"],
            &["--pairs", "labeled.csv", "--epochs", "5", "--hidden", "8:tanh", "--out", "mlp.json"],
        ),
    );
    assert_eq!(trained["inputs"], 6);
    let counts = ok(
        w.path(),
        &with_data(&["oracle", "label"], &["--pairs", "s/train.csv", "--mlp", "mlp.json", "--out", "again.csv"]),
    );
    assert_eq!(counts["pairs"], 30);
}

#[test]
fn ingest_aggregates_recipe_classes() {
    let dir = tempfile::tempdir().unwrap();
    let schema = recipes_schema(false);
    let values: Vec<f64> = schema
        .features
        .iter()
        .map(|f| match f.name.as_str() {
            "category" | "cost" | "difficulty" => 2.0,
            _ => 1.0,
        })
        .collect();
    let items = vec![Item::from_vector(1, "one", &schema, &values)];
    save_items(dir.path().join("recipes.csv"), &schema, &items).unwrap();
    let summary = ok(
        dir.path(),
        &[
            "ingest", "--schema", "recipes", "--items", "recipes.csv", "--class-map", "bundled", "--out", "meta.csv",
            "--schema-out", "meta.json",
        ],
    );
    assert_eq!(summary["items"], 1);
    assert!(summary["features"].as_u64().unwrap() < schema.features.len() as u64);
    let again = ok(dir.path(), &["ingest", "--schema", "meta.json", "--items", "meta.csv"]);
    assert_eq!(again["items"], 1);
}

#[test]
fn bad_inputs_are_reported() {
    let w = world();
    let out = run(w.path(), &["learn", "global", "--schema", "schema.json", "--items", "items.csv", "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
    let out = run(w.path(), &["learn", "global", "--seed", "1", "--pca", "sideways"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--pca"));
}
