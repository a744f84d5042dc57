use std::path::Path;
use std::process::{Command, Output};

use survivalkit::io;

fn survivalkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_survivalkit"))
        .args(args)
        .current_dir(dir)
        .env("SURVIVALKIT_THREADS", "1")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = survivalkit(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SURVIVAL_SPEC: &str = r#"{"type": "survival", "n": 200, "seed": 3,
    "kind": {"type": "cox_linear", "beta": [1.2, 0.0], "rate": 0.1},
    "censoring": {"type": "uniform", "max": 25.0}}"#;

fn simulated(dir: &Path) {
    std::fs::write(dir.join("spec.json"), SURVIVAL_SPEC).unwrap();
    ok(dir, &["simulate", "--input", "spec.json", "--output", "data.csv"]);
}

#[test]
fn survival_spec_to_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    let data = io::read_dataset_path(&d.join("data.csv")).unwrap();
    assert_eq!(data.data.len(), 200);
    assert_eq!(data.data.feature_names(), ["x1", "x2"]);

    for kind in ["km", "cox", "forest"] {
        let model = format!("{kind}.json");
        ok(d, &["fit", "--input", "data.csv", "--model", kind, "--n-trees", "10", "--output", &model]);
        ok(d, &["predict", "--model", &model, "--input", "data.csv", "--output", "pred.csv", "--horizon", "5"]);
        let preds = io::read_predictions(io::open(&d.join("pred.csv")).unwrap()).unwrap();
        assert_eq!(preds.len(), 200);
        for p in &preds {
            assert_eq!(p.at_risk, p.median_survival.is_some_and(|m| m <= 5.0), "{kind}: {p:?}");
        }
    }
}

#[test]
fn curves_dir_holds_one_curve_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--input", "data.csv", "--model", "cox", "--output", "cox.json"]);
    ok(d, &["predict", "--model", "cox.json", "--input", "data.csv", "--output", "p.csv", "--curves-dir", "curves"]);
    let curve = io::read_curve(io::open(&d.join("curves/row7.csv")).unwrap()).unwrap();
    assert!(curve.probs().windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(std::fs::read_dir(d.join("curves")).unwrap().count(), 200);
}

#[test]
fn schema_mismatch_is_a_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--input", "data.csv", "--model", "forest", "--n-trees", "5", "--output", "f.json"]);
    std::fs::write(d.join("other.csv"), "time,event,x1,x9\n1,1,0.5,0.2\n").unwrap();
    let out = survivalkit(d, &["predict", "--model", "f.json", "--input", "other.csv", "--output", "p.csv"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error: schema mismatch"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn reordered_columns_are_aligned() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--input", "data.csv", "--model", "cox", "--output", "cox.json"]);
    let text = std::fs::read_to_string(d.join("data.csv")).unwrap();
    let swapped: String = text
        .lines()
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            format!("{},{},{},{}\n", c[0], c[1], c[3], c[2])
        })
        .collect();
    std::fs::write(d.join("swapped.csv"), swapped).unwrap();
    ok(d, &["predict", "--model", "cox.json", "--input", "data.csv", "--output", "a.csv"]);
    ok(d, &["predict", "--model", "cox.json", "--input", "swapped.csv", "--output", "b.csv"]);
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());
}

#[test]
fn evaluate_writes_summary_with_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    std::fs::write(d.join("config.json"), r#"{"n_trees": 7, "seed": 11, "n_boot": 9}"#).unwrap();
    ok(d, &["--config", "config.json", "evaluate", "--input", "data.csv", "--model", "forest", "--n-boot", "3", "--output", "ev"]);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("ev/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["model"], "forest");
    assert_eq!(summary["mode"], "bootstrap-cv");
    // the flag wins over the file, the file over the default
    assert_eq!(summary["n_boot"], 3);
    assert_eq!(summary["config"]["n_trees"], 7);
    assert_eq!(summary["config"]["seed"], 11);
    assert_eq!(summary["config"]["alpha"], 0.05);
    let ibs = summary["ibs"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ibs));

    let curve = io::read_error_curve(io::open(&d.join("ev/error_curve.csv")).unwrap()).unwrap();
    assert_eq!(curve.first().map(|p| p.0), Some(0.0));
    let replicates = std::fs::read_to_string(d.join("ev/replicate_ibs.csv")).unwrap();
    assert_eq!(replicates.lines().count(), 4);
    assert!(d.join("ev/calibration.csv").exists());
}

#[test]
fn holdout_evaluation_of_a_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--input", "data.csv", "--model", "km", "--output", "km.json"]);
    ok(d, &["evaluate", "--input", "data.csv", "--model", "km.json", "--output", "ev", "--horizon", "10"]);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("ev/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "holdout");
    assert_eq!(summary["model"], "km");
    assert_eq!(summary["horizon"], 10.0);
}

#[test]
fn binary_forest_outputs_probabilities_and_auc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--input", "data.csv", "--model", "binary-forest", "--n-trees", "10", "--output", "b.json"]);
    ok(d, &["predict", "--model", "b.json", "--input", "data.csv", "--output", "p.csv"]);
    let text = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert!(text.starts_with("player_id,churn_probability\n"));
    for line in text.lines().skip(1) {
        let p: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    ok(d, &["evaluate", "--input", "data.csv", "--model", "b.json", "--output", "ev"]);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("ev/summary.json")).unwrap()).unwrap();
    assert!(summary["auc"].as_f64().unwrap() > 0.5);
}

#[test]
fn importance_lists_every_feature() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--input", "data.csv", "--model", "forest", "--n-trees", "20", "--output", "f.json"]);
    ok(d, &["importance", "--model", "f.json", "--input", "data.csv", "--n-repeats", "2", "--output", "imp.csv"]);
    let text = std::fs::read_to_string(d.join("imp.csv")).unwrap();
    assert!(text.starts_with("feature,importance,std_error,rank\n"));
    assert_eq!(text.lines().count(), 3);

    ok(d, &["fit", "--input", "data.csv", "--model", "cox", "--output", "c.json"]);
    let out = survivalkit(d, &["importance", "--model", "c.json", "--input", "data.csv", "--output", "x.csv"]);
    assert!(stderr(&out).contains("needs a forest"));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = survivalkit(d, &["fit", "--input", "missing.csv", "--model", "cox", "--output", "m.json"]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error: missing.csv"), "{}", stderr(&out));

    simulated(d);
    std::fs::write(d.join("bad.json"), r#"{"tree_count": 3}"#).unwrap();
    let out = survivalkit(d, &["--config", "bad.json", "fit", "--input", "data.csv", "--model", "km", "--output", "m.json"]);
    assert!(stderr(&out).contains("unknown field"), "{}", stderr(&out));

    let out = survivalkit(d, &["evaluate", "--input", "data.csv", "--model", "svm", "--output", "ev"]);
    assert!(stderr(&out).contains("model kind"), "{}", stderr(&out));
}

#[test]
fn event_log_featurize_respects_observation_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("events.csv"),
        "player_id,timestamp,kind,amount,level\n\
         a,2014-01-01T10:00:00,session_start,,\n\
         a,2014-01-01T10:30:00,session_end,,\n\
         a,2014-01-03T10:00:00,session_start,,\n\
         a,2014-01-03T10:20:00,session_end,,\n\
         b,2014-01-02T09:00:00,session_start,,\n\
         b,2014-01-02T09:10:00,purchase,9.99,\n\
         b,2014-01-02T09:40:00,session_end,,\n",
    )
    .unwrap();
    ok(d, &["featurize", "--input", "events.csv", "--output", "f.csv", "--observation-end", "2014-02-01"]);
    let loaded = io::read_dataset_path(&d.join("f.csv")).unwrap();
    assert_eq!(loaded.row_ids(), ["a", "b"]);
    let obs = loaded.data.observations();
    // both went quiet for 10+ days before February
    assert!(obs.iter().all(|o| o.event));
    assert_eq!(obs[0].time, 3.0);
    assert_eq!(obs[1].time, 1.0);

    // observed only up to the last event date, nobody has churned yet
    ok(d, &["featurize", "--input", "events.csv", "--output", "g.csv"]);
    let loaded = io::read_dataset_path(&d.join("g.csv")).unwrap();
    assert!(loaded.data.observations().iter().all(|o| !o.event));
}

#[test]
fn feature_subset_fits_and_predicts_from_the_full_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--input", "data.csv", "--model", "cox", "--features", "x1", "--output", "c.json"]);
    let doc = survivalkit::format::ModelDocument::load(&d.join("c.json")).unwrap();
    assert_eq!(doc.feature_names(), ["x1"]);
    ok(d, &["predict", "--model", "c.json", "--input", "data.csv", "--output", "p.csv"]);

    let out = survivalkit(d, &["fit", "--input", "data.csv", "--model", "cox", "--features", "x1,x7", "--output", "c.json"]);
    assert!(stderr(&out).starts_with("error: schema mismatch: input lacks [x7]"), "{}", stderr(&out));
}
