//! The command-line tool end to end on a small synthetic dataset.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use echofinder::annotations::DetectionFile;
use echofinder::config::PipelineConfig;
use echofinder::dataset::Dataset;
use echofinder::model_io::load_model;
use echofinder::report::Report;
use echofinder_core::eval::evaluate_framework;
use echofinder_core::roi::extract_rois;
use echofinder_core::synth::Split;

const SMALL: &str = r#"
[synth]
width = 360
height = 280
n_schools = { min = 1, max = 3 }
n_distractors = { min = 1, max = 2 }
clutter_per_channel = 40

[cnn]
epochs = 8
batch_size = 8

[cnn_shape]
conv1_filters = 4
conv2_filters = 8
hidden = 16
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_echofinder"));
    c.env_remove("ECHOFINDER_THREADS");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn echofinder")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Shared workspace: config, dataset, sample set and models, built once.
struct World {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
}

fn world() -> &'static World {
    static W: OnceLock<World> = OnceLock::new();
    W.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().to_owned();
        std::fs::write(dir.join("small.toml"), SMALL).unwrap();
        ok(&dir, &["synth", "--config", "small.toml", "--n", "12", "--seed", "7", "--out", "data"]);
        ok(&dir, &["mine", "--config", "small.toml", "--dataset", "data", "--out", "samples"]);
        ok(&dir, &["train", "--config", "small.toml", "--samples", "samples", "--model", "cnn", "--seed", "1", "--out", "cnn.emdl"]);
        ok(&dir, &["train", "--config", "small.toml", "--samples", "samples", "--model", "svm", "--out", "svm.emdl"]);
        World { _tmp: tmp, dir }
    })
}

fn read<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn synth_rejects_zero_echograms() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["synth", "--n", "0", "--out", "d"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_in(tmp.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run_in(tmp.path(), &["extract", "--in", "x"]).status.code(), Some(1));
    let out = bin()
        .current_dir(tmp.path())
        .env("ECHOFINDER_THREADS", "zero")
        .args(["synth", "--n", "1", "--out", "d"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run_in(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["extract", "--in", "missing.ech", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ech"));
}

#[test]
fn corrupt_echogram_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.ech"), b"XCHO\x01\x00").unwrap();
    let out = run_in(tmp.path(), &["extract", "--in", "bad.ech", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

#[test]
fn malformed_config_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "[roi]\nno_such_key = 1\n").unwrap();
    let out = run_in(tmp.path(), &["synth", "--config", "c.toml", "--n", "1", "--out", "d"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dataset_layout_and_split() {
    let w = world();
    let ds = Dataset::open(&w.dir.join("data")).unwrap();
    assert_eq!(ds.manifest.entries.len(), 12);
    // 12 echograms: 8 for training (6 train, 2 val), 4 for testing.
    assert_eq!(ds.entries(&[Split::Test]).len(), 4);
    assert_eq!(ds.entries(&[Split::Val]).len(), 2);
    for e in &ds.manifest.entries {
        assert!(w.dir.join("data").join(&e.echogram).is_file());
        assert!(w.dir.join("data").join(&e.annotations).is_file());
    }
    assert!(w.dir.join("data/run.json").is_file());
}

#[test]
fn synth_rerun_is_identical() {
    let w = world();
    ok(&w.dir, &["synth", "--config", "small.toml", "--n", "12", "--seed", "7", "--out", "data_again"]);
    let threaded = bin()
        .current_dir(&w.dir)
        .env("ECHOFINDER_THREADS", "3")
        .args(["synth", "--config", "small.toml", "--n", "12", "--seed", "7", "--out", "data_threaded"])
        .output()
        .unwrap();
    assert!(threaded.status.success());
    for other in ["data_again", "data_threaded"] {
        assert_eq!(tree(&w.dir.join("data")), tree(&w.dir.join(other)), "{other}");
    }
}

/// Every file except run manifests, with contents, sorted by name.
fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.file_name().unwrap().to_string_lossy().ends_with("run.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn extract_matches_the_library() {
    let w = world();
    ok(&w.dir, &["extract", "--in", "data", "--split", "test", "--out", "rois.json"]);
    let file: DetectionFile = read(&w.dir.join("rois.json"));
    let ds = Dataset::open(&w.dir.join("data")).unwrap();
    let cfg = PipelineConfig::default();
    assert_eq!(file.echograms.len(), 4);
    for entry in ds.entries(&[Split::Test]) {
        let e = ds.load_echogram(entry).unwrap();
        let lib = extract_rois(&e, &cfg.roi).unwrap();
        let cli: Vec<_> = file.find(&entry.id).unwrap().boxes.iter().map(|b| b.bbox().unwrap()).collect();
        assert_eq!(cli, lib);
    }
}

#[test]
fn area_override_gives_a_superset() {
    let w = world();
    std::fs::write(w.dir.join("loose.toml"), "[roi]\nmin_area_px = 1\n").unwrap();
    let one = "data/echo_0003.ech";
    ok(&w.dir, &["extract", "--in", one, "--out", "base.json"]);
    ok(&w.dir, &["extract", "--config", "loose.toml", "--in", one, "--out", "loose.json"]);
    let base: DetectionFile = read(&w.dir.join("base.json"));
    let loose: DetectionFile = read(&w.dir.join("loose.json"));
    let loose_boxes = &loose.echograms[0].boxes;
    assert_eq!(base.echograms[0].echogram_id, "echo_0003");
    for b in &base.echograms[0].boxes {
        assert!(loose_boxes.contains(b));
    }
}

#[test]
fn evaluate_prints_three_rows_with_non_increasing_recall() {
    let w = world();
    ok(&w.dir, &["extract", "--in", "data", "--out", "all_rois.json"]);
    let stdout = ok(
        &w.dir,
        &["evaluate", "--dataset", "data", "--detections", "all_rois.json", "--iou", "0.0", "0.2", "0.4", "--out", "rep.json"],
    );
    assert_eq!(stdout.lines().count(), 5, "{stdout}");
    let report: Report = read(&w.dir.join("rep.json"));
    assert_eq!(report.rows.len(), 3);
    for pair in report.rows.windows(2) {
        assert!(pair[1].recall <= pair[0].recall);
    }
    let bad = run_in(&w.dir, &["evaluate", "--dataset", "data", "--detections", "all_rois.json", "--iou", "0.4", "0.2"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn detect_then_evaluate_equals_in_process_framework() {
    let w = world();
    ok(&w.dir, &["detect", "--in", "data", "--split", "test", "--model", "cnn.emdl", "--out", "det.json"]);
    ok(
        &w.dir,
        &["evaluate", "--dataset", "data", "--split", "test", "--detections", "det.json", "--iou", "0.4", "--out", "det_rep.json"],
    );
    ok(
        &w.dir,
        &["evaluate", "--dataset", "data", "--split", "test", "--model", "cnn.emdl", "--iou", "0.4", "--out", "model_rep.json"],
    );
    let via_file: Report = read(&w.dir.join("det_rep.json"));
    let via_model: Report = read(&w.dir.join("model_rep.json"));
    assert_eq!(via_file.rows, via_model.rows);

    let ds = Dataset::open(&w.dir.join("data")).unwrap();
    let scenes: Vec<_> = ds.entries(&[Split::Test]).into_iter().map(|e| ds.load_scene(e).unwrap()).collect();
    let model = load_model(&w.dir.join("cnn.emdl")).unwrap();
    let fw = evaluate_framework(scenes.iter().map(|(e, g)| (e, g)), &PipelineConfig::default().roi, &model, 0.4).unwrap();
    let row = via_file.rows[0];
    assert_eq!((row.tp, row.fp, row.fn_), (fw.counts.tp, fw.counts.fp, fw.counts.fn_));
    assert_eq!(row.metrics(), fw.overall);
}

#[test]
fn training_twice_gives_identical_model_files() {
    let w = world();
    ok(&w.dir, &["train", "--config", "small.toml", "--samples", "samples", "--model", "cnn", "--seed", "1", "--out", "cnn2.emdl"]);
    assert_eq!(std::fs::read(w.dir.join("cnn.emdl")).unwrap(), std::fs::read(w.dir.join("cnn2.emdl")).unwrap());
    ok(&w.dir, &["train", "--config", "small.toml", "--samples", "samples", "--model", "cnn", "--seed", "2", "--out", "cnn3.emdl"]);
    assert_ne!(std::fs::read(w.dir.join("cnn.emdl")).unwrap(), std::fs::read(w.dir.join("cnn3.emdl")).unwrap());
}

#[test]
fn run_manifest_records_the_invocation() {
    let w = world();
    let m: serde_json::Value = read(&w.dir.join("cnn.emdl.run.json"));
    assert_eq!(m["command"], "train");
    assert_eq!(m["seed"], 1);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"][0], "cnn.emdl");
    assert!(m["duration_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn render_writes_a_png() {
    let w = world();
    ok(&w.dir, &["detect", "--in", "data/echo_0000.ech", "--model", "svm.emdl", "--out", "one.json"]);
    ok(
        &w.dir,
        &[
            "render", "--in", "data/echo_0000.ech", "--annotations", "data/echo_0000.json", "--detections", "one.json",
            "--channel", "2", "--out", "one.png",
        ],
    );
    let img = image::open(w.dir.join("one.png")).unwrap();
    assert_eq!((img.width(), img.height()), (360, 280));
    let bad = run_in(&w.dir, &["render", "--in", "data/echo_0000.ech", "--channel", "9", "--out", "x.png"]);
    assert_eq!(bad.status.code(), Some(2));
}
