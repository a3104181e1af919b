use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crowd_anomaly::frame_io::{
    load_frame_sequence, write_frame_sequence, DatasetManifest, Label, LabelInterval, ManifestEntry,
};
use crowd_anomaly_cli::{report_paths, ClassifierFile, ModelFile};
use tempfile::TempDir;

fn crowdtex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdtex"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = crowdtex(args);
    assert!(
        out.status.success(),
        "crowdtex {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(args: &[&str], code: i32) -> String {
    let out = crowdtex(args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "crowdtex {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("synth-{seed}"));
    ok(&["synth", "--seed", &seed.to_string(), "--out", s(&out)]);
    out.join("manifest.json")
}

/// Copies the first `frames` frames of a synthetic sequence under a normal-only manifest.
fn normal_only(dir: &Path, seed: u64, frames: usize) -> PathBuf {
    let manifest = synth(dir, seed);
    let seq = load_frame_sequence(manifest.parent().unwrap().join("frames")).unwrap();
    let root = dir.join(format!("normal-{seed}"));
    write_frame_sequence(&seq.sub_sequence(0, frames).unwrap(), root.join("frames")).unwrap();
    let m = DatasetManifest {
        entries: vec![ManifestEntry {
            path: "frames".into(),
            scene: "normal".into(),
            frame_count: Some(frames),
            intervals: vec![LabelInterval {
                start: 0,
                end: frames,
                label: Label::Normal,
            }],
        }],
        base_dir: root.clone(),
    };
    let path = root.join("manifest.json");
    fs::write(&path, m.to_json().unwrap()).unwrap();
    path
}

fn read_model(path: &Path) -> ModelFile {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn synth_writes_frames_and_manifest() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 7);
    let root = manifest.parent().unwrap();
    let frames = fs::read_dir(root.join("frames")).unwrap().count();
    assert_eq!(frames, 64);
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("\"abnormal\""));
}

#[test]
fn synth_rejects_late_dispersal() {
    let dir = TempDir::new().unwrap();
    let err = fails_with(
        &[
            "synth",
            "--frames",
            "20",
            "--dispersal-frame",
            "20",
            "--out",
            s(dir.path()),
        ],
        2,
    );
    assert!(err.contains("--dispersal-frame"), "{err}");
}

#[test]
fn train_writes_model_of_feature_dimension() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 1);
    let model = dir.path().join("model.json");
    ok(&[
        "train",
        "--manifest",
        s(&manifest),
        "--state-dim",
        "3",
        "--out",
        s(&model),
    ]);
    let file = read_model(&model);
    assert_eq!(file.gaussian.dim, 3 + 4);
    assert_eq!(file.state_dim, 3);
    assert_eq!(file.gaussian.m, 4 * 64);
    file.model().unwrap();
}

#[test]
fn train_on_empty_manifest_fails() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join("empty.json");
    fs::write(&manifest, "").unwrap();
    let err = fails_with(
        &[
            "train",
            "--manifest",
            s(&manifest),
            "--out",
            s(&dir.path().join("m.json")),
        ],
        3,
    );
    assert!(err.contains("normal cubes"), "{err}");
}

#[test]
fn train_rejects_state_dim_above_depth() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 1);
    let err = fails_with(
        &[
            "train",
            "--manifest",
            s(&manifest),
            "--cube-q",
            "4",
            "--state-dim",
            "4",
            "--out",
            s(&dir.path().join("m.json")),
        ],
        2,
    );
    assert!(err.contains("q-1"), "{err}");
}

#[test]
fn scoring_training_data_flags_nothing() {
    let dir = TempDir::new().unwrap();
    let manifest = normal_only(dir.path(), 2, 32);
    let model = dir.path().join("model.json");
    let scores = dir.path().join("scores.csv");
    ok(&["train", "--manifest", s(&manifest), "--out", s(&model)]);
    ok(&[
        "score",
        "--manifest",
        s(&manifest),
        "--model",
        s(&model),
        "--out",
        s(&scores),
    ]);
    let rows = csv_rows(&scores);
    assert_eq!(rows[0], ["frame", "score_max", "is_anomalous"]);
    assert_eq!(rows.len(), 33);
    assert!(rows[1..].iter().all(|r| r[2] == "0"));
}

#[test]
fn scoring_dispersal_flags_later_frames_and_writes_overlays() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 3);
    let model = dir.path().join("model.json");
    let scores = dir.path().join("scores.csv");
    let overlay = dir.path().join("overlay");
    ok(&["train", "--manifest", s(&manifest), "--out", s(&model)]);
    ok(&[
        "score",
        "--manifest",
        s(&manifest),
        "--model",
        s(&model),
        "--out",
        s(&scores),
        "--overlay",
        s(&overlay),
    ]);
    let rows = csv_rows(&scores);
    let flagged: Vec<usize> = rows[1..]
        .iter()
        .filter(|r| r[2] == "1")
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert!(flagged.iter().any(|&t| t >= 32), "{flagged:?}");

    let src = load_frame_sequence(manifest.parent().unwrap().join("frames")).unwrap();
    let ov = load_frame_sequence(&overlay).unwrap();
    assert_eq!(
        (ov.width(), ov.height(), ov.frame_count()),
        (src.width(), src.height(), src.frame_count())
    );
    let t = flagged[0];
    assert!(ov.frame(t).contains(&1.0));
}

#[test]
fn score_with_mismatched_state_dim_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 1);
    let model = dir.path().join("model.json");
    ok(&["train", "--manifest", s(&manifest), "--out", s(&model)]);
    let err = fails_with(
        &[
            "score",
            "--manifest",
            s(&manifest),
            "--model",
            s(&model),
            "--state-dim",
            "3",
            "--out",
            s(&dir.path().join("x.csv")),
        ],
        3,
    );
    assert!(err.contains("dimension mismatch"), "{err}");
}

#[test]
fn model_schema_mismatch_fails_loudly() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 1);
    let model = dir.path().join("model.json");
    ok(&["train", "--manifest", s(&manifest), "--out", s(&model)]);
    let text = fs::read_to_string(&model)
        .unwrap()
        .replace("\"schema_version\": 1", "\"schema_version\": 99");
    fs::write(&model, text).unwrap();
    let err = fails_with(
        &[
            "score",
            "--manifest",
            s(&manifest),
            "--model",
            s(&model),
            "--out",
            s(&dir.path().join("x.csv")),
        ],
        3,
    );
    assert!(err.contains("schema"), "{err}");
}

#[test]
fn merge_adds_counts_of_disjoint_batches() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), 10);
    let b = synth(dir.path(), 11);
    let (ma, mb, merged) = (
        dir.path().join("a.json"),
        dir.path().join("b.json"),
        dir.path().join("ab.json"),
    );
    ok(&["train", "--manifest", s(&a), "--out", s(&ma)]);
    ok(&["train", "--manifest", s(&b), "--out", s(&mb)]);
    ok(&[
        "merge",
        "--model",
        s(&ma),
        "--manifest",
        s(&b),
        "--out",
        s(&merged),
    ]);
    let (fa, fb, fm) = (read_model(&ma), read_model(&mb), read_model(&merged));
    assert_eq!(fm.gaussian.m, fa.gaussian.m + fb.gaussian.m);
    assert!(fm.threshold >= fa.threshold);
    assert_eq!(fm.cube, fa.cube);
    fm.model().unwrap();
}

#[test]
fn merging_own_training_data_keeps_the_mean() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 12);
    let (model, merged) = (dir.path().join("m.json"), dir.path().join("mm.json"));
    ok(&["train", "--manifest", s(&manifest), "--out", s(&model)]);
    ok(&[
        "merge",
        "--model",
        s(&model),
        "--manifest",
        s(&manifest),
        "--out",
        s(&merged),
    ]);
    let (a, m) = (read_model(&model), read_model(&merged));
    for (x, y) in a.gaussian.mu.iter().zip(&m.gaussian.mu) {
        assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
    }
    assert_eq!(m.gaussian.m, 2 * a.gaussian.m);
}

#[test]
fn train_clf_writes_two_label_classifier() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 4);
    let out = dir.path().join("clf.json");
    ok(&[
        "train-clf",
        "--manifest",
        s(&manifest),
        "--epochs",
        "50",
        "--out",
        s(&out),
    ]);
    let file: ClassifierFile = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(file.classifier.labels, ["normal", "abnormal"]);
    assert_eq!(file.classifier.w.len(), 2 * (file.state_dim + 4 + 1));
    assert_eq!(file.standardize.mean.len(), file.state_dim + 4);
    assert_eq!(file.training.epochs, 50);
    assert!(file.training_accuracy > 50.0);
}

#[test]
fn eval_reports_agree_across_formats() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.csv");
    ok(&["eval", "--runs", "3", "--seed", "5", "--out", s(&out)]);
    let (csv_path, json_path) = report_paths(&out);
    let rows = csv_rows(&csv_path);
    assert_eq!(rows[0], ["run", "accuracy", "tp", "fp", "tn", "fn"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4][0], "average");

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    for (r, row) in rows[1..4].iter().enumerate() {
        let j = json["runs"][r]["accuracy"].as_f64().unwrap();
        let c: f64 = row[1].parse().unwrap();
        assert!((j - c).abs() <= 1e-9);
    }
    let avg: f64 = rows[4][1].parse().unwrap();
    assert!((json["average_accuracy"].as_f64().unwrap() - avg).abs() <= 1e-9);
}

#[test]
fn eval_over_manifest_entries() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 6);
    let out = dir.path().join("r.csv");
    let stdout = ok(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--runs",
        "1",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("average"));
    fails_with(
        &[
            "eval",
            "--manifest",
            s(&manifest),
            "--runs",
            "2",
            "--out",
            s(&out),
        ],
        2,
    );
}

#[test]
fn eval_with_zero_runs_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let err = fails_with(
        &["eval", "--runs", "0", "--out", s(&dir.path().join("r.csv"))],
        2,
    );
    assert!(err.contains("--runs"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), 8);
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"cube_q": 6, "state_dim": 2, "percentile": 95.0}"#,
    )
    .unwrap();
    let model = dir.path().join("m.json");
    ok(&[
        "train",
        "--config",
        s(&config),
        "--manifest",
        s(&manifest),
        "--state-dim",
        "4",
        "--out",
        s(&model),
    ]);
    let file = read_model(&model);
    assert_eq!(file.cube.q, 6);
    assert_eq!(file.cube.temporal_stride, 6);
    assert_eq!(file.state_dim, 4);
    assert_eq!(file.percentile, 95.0);
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"cube_size": 6}"#).unwrap();
    fails_with(
        &["synth", "--config", s(&config), "--out", s(dir.path())],
        2,
    );
}

#[test]
fn missing_manifest_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    fails_with(
        &[
            "train",
            "--manifest",
            s(&dir.path().join("nope.json")),
            "--out",
            s(&dir.path().join("m.json")),
        ],
        3,
    );
}

#[test]
fn bad_flag_is_a_usage_error() {
    fails_with(&["train", "--bogus"], 2);
}
