use std::path::{Path, PathBuf};

use park_core::learners::{load_bundle, EvalMetrics};
use park_core::{FeatureVector, TaskKind};
use park_service::cli::run;
use serde_json::Value;

fn park(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("park").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn golden(task: TaskKind) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/golden")
        .join(format!("{}.{}", task, task.artifact_extension()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let (code, out, err) = park(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("Usage"), "{err}");
    let (code, out, _) = park(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("analyze") && out.contains("features"));
}

#[test]
fn motor_features_json() {
    let (code, out, err) = park(&["features", "motor_left", s(&golden(TaskKind::MotorLeft)), "--json"]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    let fv: FeatureVector = serde_json::from_value(v["features"].clone()).unwrap();
    assert_eq!(fv.schema_id, "motor.v1");
    assert_eq!(fv.names, park_core::motor::feature_names());
    assert!(!v["taps"].as_array().unwrap().is_empty());
}

#[test]
fn speech_and_face_features() {
    let (code, out, _) = park(&["features", "speech", s(&golden(TaskKind::Speech))]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    assert!(lines[0].starts_with("f0_mean_hz"));

    let (code, out, _) = park(&["features", "face_smile", s(&golden(TaskKind::FaceSmile)), "--json"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["task"]["schema_id"], "face.task.v1");
    assert_eq!(v["combined"]["schema_id"], "face.v1");
    assert_eq!(v["combined"]["values"].as_array().unwrap().len(), park_core::face::feature_names().len());
}

#[test]
fn bad_input_is_a_diagnosed_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let junk = tmp.path().join("junk.ljsonl");
    std::fs::write(&junk, "not json\n").unwrap();
    let (code, out, err) = park(&["features", "motor_right", s(&junk)]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.starts_with("error:"), "{err}");
    let (code, _, _) = park(&["features", "knees", s(&junk)]);
    assert_eq!(code, 2);
}

#[test]
fn train_eval_and_cv_on_synthetic_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let train = tmp.path().join("train.csv");
    let test = tmp.path().join("test.csv");
    let bundle = tmp.path().join("bundle.json");
    assert_eq!(park(&["synth", "cohort", "speech", "--n", "160", "--seed", "1", "--out", s(&train)]).0, 0);
    assert_eq!(park(&["synth", "cohort", "speech", "--n", "80", "--seed", "2", "--out", s(&test)]).0, 0);
    let (code, _, err) = park(&["train", "speech", s(&train), "--out", s(&bundle), "--trees", "60"]);
    assert_eq!(code, 0, "{err}");

    let (code, out, _) = park(&["eval", "speech", s(&test), "--model", s(&bundle)]);
    assert_eq!(code, 0);
    let auc: f64 = out.trim().strip_prefix("auc ").unwrap().parse().unwrap();
    assert!(auc >= 0.95, "{auc}");

    let (_, out, _) = park(&["eval", "speech", s(&test), "--model", s(&bundle), "--json"]);
    let m: EvalMetrics = serde_json::from_str(&out).unwrap();
    assert!(m.auc.unwrap() >= 0.95 && m.mae.is_none());

    // training a second modality keeps the first
    let motor = tmp.path().join("motor.csv");
    park(&["synth", "cohort", "motor", "--n", "60", "--seed", "3", "--out", s(&motor)]);
    assert_eq!(park(&["train", "motor", s(&motor), "--out", s(&bundle), "--trees", "30"]).0, 0);
    let b = load_bundle(&bundle).unwrap();
    assert!(b.speech.is_some() && b.motor.is_some() && b.face.is_none());
    let (code, out, _) = park(&["eval", "motor", s(&motor), "--model", s(&bundle)]);
    assert_eq!(code, 0);
    assert!(out.contains("mae ") && out.contains("pearson_r "));

    // a face model is absent; a speech CSV is the wrong schema for motor
    assert_eq!(park(&["eval", "face", s(&test), "--model", s(&bundle)]).0, 1);
    assert_eq!(park(&["train", "motor", s(&train), "--out", s(&bundle)]).0, 1);

    let (code, out, _) = park(&["cv", "motor", s(&motor), "--folds", "3", "--trees", "30", "--json"]);
    assert_eq!(code, 0);
    let m: EvalMetrics = serde_json::from_str(&out).unwrap();
    assert!(m.pearson_r.unwrap() > 0.5);
}

#[test]
fn analyze_text_summary_and_partial_session() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let (code, _, err) = park(&["synth", "session", s(&dir), "--seed", "3", "--tasks", "speech,motor_left"]);
    assert_eq!(code, 0, "{err}");
    let model = data.join("model.json");
    let resources = data.join("resources.json");
    let args = ["analyze", s(&dir), "--model", s(&model), "--resources", s(&resources)];
    let (code, out, err) = park(&args);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("Overall likelihood"));
    assert!(out.contains("not intended for clinical use"));
    let report: park_core::RiskReport = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.modality_scores.len(), 2);
    assert_eq!(report.not_assessed, vec![park_core::Modality::Face]);
    assert!(report.resources.iter().all(|r| r.region_code == "GLOBAL"));
}

#[test]
fn config_file_feeds_analyze_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let cfg = tmp.path().join("park.toml");
    std::fs::write(
        &cfg,
        format!(
            "model_bundle = {:?}\nresource_directory = {:?}\n",
            data.join("model.json").to_str().unwrap(),
            data.join("resources.json").to_str().unwrap()
        ),
    )
    .unwrap();
    let dir = tmp.path().join("s");
    park(&["synth", "session", s(&dir), "--seed", "4", "--tasks", "speech"]);
    let (code, out, err) = park(&["--config", s(&cfg), "analyze", s(&dir), "--json"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("\"modality\": \"speech\""));
    std::fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(park(&["--config", s(&cfg), "analyze", s(&dir)]).0, 1);
}
