use std::path::Path;
use std::process::{Command, Output};

use pengauge::dataset::Dataset;
use pengauge::fouling::MissionReport;
use pengauge::imaging::{self, Image, PixelClass};

const SMALL_MISSION: [&str; 10] = [
    "--set",
    "mission.net_width=2",
    "--set",
    "mission.net_height=1",
    "--set",
    "plan.n_vertical=2",
    "--set",
    "plan.z_min=0.3",
    "--set",
    "plan.z_max=0.7",
];

fn pengauge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pengauge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pengauge(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_mission(dir: &Path, coverage: &str) {
    let mut args = vec!["synth", "mission", "--out", s(dir), "--set"];
    let cov = format!("mission.coverage={coverage}");
    args.push(&cov);
    args.extend(SMALL_MISSION);
    ok(&args);
}

#[test]
fn synth_scene_writes_dataset_entry() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scenes");
    let stdout = ok(&["synth", "scene", "--out", s(&out), "--id", "a", "--set", "scene.coverage=0.33", "--set", "scene.seed=3"]);
    assert!(stdout.starts_with("a: coverage 0.3"), "{stdout}");
    let ds = Dataset::open(&out).unwrap();
    let (img, mask) = ds.load("a").unwrap();
    assert_eq!(img.dims(), (480, 270));
    assert!(mask.classes().contains(&PixelClass::Cage));
    let truth = std::fs::read_to_string(out.join("truth.tsv")).unwrap();
    assert!(truth.lines().nth(1).unwrap().starts_with("a\t1\t"), "{truth}");
}

#[test]
fn mission_estimate_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m33");
    small_mission(&m, "0.33");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(m.join("summary.json")).unwrap()).unwrap();
    assert!(summary["frames"].as_u64().unwrap() > 5, "{summary}");

    let stdout = ok(&["estimate", "--mission", s(&m)]);
    assert!(stdout.contains("mean fouling"), "{stdout}");
    let report = MissionReport::from_json(&std::fs::read_to_string(m.join("report.json")).unwrap()).unwrap();
    assert!(report.accepted_frames > 0);
    let frames_csv = std::fs::read_to_string(m.join("frames.csv")).unwrap();
    assert_eq!(frames_csv.lines().count(), report.total_frames + 1);

    let raw = dir.path().join("raw");
    ok(&["estimate", "--mission", s(&m), "--no-filters", "--out", s(&raw)]);
    let unfiltered = MissionReport::from_json(&std::fs::read_to_string(raw.join("report.json")).unwrap()).unwrap();
    assert!(!unfiltered.config.contour_filter && !unfiltered.config.movement_filter);
    assert!(unfiltered.accepted_frames >= report.accepted_frames);
    // a toy mission samples a thin strip, so score against the frames it saw
    let seen = summary["mean_frame_coverage"].as_f64().unwrap();
    assert!((unfiltered.mean_fouling - seen).abs() <= 0.02, "{} vs {seen}", unfiltered.mean_fouling);

    let table = dir.path().join("eval.csv");
    let stdout = ok(&["evaluate", s(&m), "--out", s(&table)]);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "scenario,actual,estimated,abs_error");
    assert!(lines[1].starts_with("m33,"));
    let cols: Vec<f64> = lines[1].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    let layout = summary["layout_coverage"].as_f64().unwrap();
    assert!((cols[0] - layout * 100.0).abs() <= 0.0051, "{stdout}");
    assert!((cols[1] - report.mean_fouling * 100.0).abs() <= 0.0051, "{stdout}");
    assert!((cols[2] - (cols[1] - cols[0]).abs()).abs() <= 0.0151, "{stdout}");
    assert!(lines[2].starts_with("mean,,,"));
    assert_eq!(std::fs::read_to_string(&table).unwrap(), stdout);
}

#[test]
fn segment_with_external_masks_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m");
    small_mission(&m, "0.5");
    // external masks: the labeled cage pixels written as 0/255 PNGs
    let ext = dir.path().join("ext");
    std::fs::create_dir_all(&ext).unwrap();
    for e in std::fs::read_dir(m.join("masks")).unwrap() {
        let p = e.unwrap().path();
        let lm = imaging::read_labeled_mask(&p).unwrap();
        let bits = lm.classes().iter().map(|&c| c == PixelClass::Cage).collect();
        let bm = imaging::BinaryMask::new(lm.width(), lm.height(), bits).unwrap();
        imaging::write_mask(ext.join(p.file_name().unwrap()), &bm).unwrap();
    }
    let seg = dir.path().join("seg");
    ok(&["segment", "--mission", s(&m), "--external-masks", s(&ext), "--out", s(&seg)]);

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["estimate", "--mission", s(&m), "--out", s(&a)]);
    ok(&["estimate", "--mission", s(&m), "--masks", s(&seg), "--out", s(&b)]);
    let ra = MissionReport::from_json(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    let rb = MissionReport::from_json(&std::fs::read_to_string(b.join("report.json")).unwrap()).unwrap();
    assert_eq!(ra.mean_fouling, rb.mean_fouling);
}

#[test]
fn train_on_synthetic_scenes_then_segment() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    for (i, cov) in ["0", "0.3", "0.5", "0.7", "0.2"].iter().enumerate() {
        let seed = format!("scene.seed={i}");
        let c = format!("scene.coverage={cov}");
        let id = format!("s{i}");
        ok(&["synth", "scene", "--out", s(&ds), "--id", &id, "--set", &seed, "--set", &c]);
    }
    let model = dir.path().join("clf.txt");
    let stdout = ok(&["train", "--dataset", s(&ds), "--out", s(&model), "--set", "train.epochs=300"]);
    assert!(stdout.starts_with("held-out accuracy"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("clf.txt.report.json")).unwrap()).unwrap();
    assert!(report["test_accuracy"].as_f64().unwrap() > 0.9, "{report}");

    let m = dir.path().join("m");
    small_mission(&m, "0.4");
    let seg = dir.path().join("seg");
    ok(&["segment", "--mission", s(&m), "--classifier", s(&model), "--out", s(&seg)]);
    assert_eq!(
        std::fs::read_dir(&seg).unwrap().count(),
        std::fs::read_dir(m.join("frames")).unwrap().count()
    );
}

#[test]
fn single_class_training_fails_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let d = Dataset::create(&ds).unwrap();
    for id in ["a", "b"] {
        ok(&["synth", "scene", "--out", s(&ds), "--id", id]);
        // relabel everything as sea
        let (img, _) = d.load(id).unwrap();
        let sea = imaging::LabeledMask::filled(img.width(), img.height(), PixelClass::Sea).unwrap();
        imaging::write_labeled_mask(d.mask_path(id), &sea).unwrap();
    }

    let out = pengauge(&["train", "--dataset", s(&ds), "--out", s(&dir.path().join("m.txt"))]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "single-class", "{stderr}");
}

#[test]
fn bad_config_value_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = pengauge(&["synth", "scene", "--out", s(dir.path()), "--set", "scene.distance=far"]);
    assert!(!out.status.success());
    let line: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert!(line["message"].as_str().unwrap().contains("scene.distance"), "{line}");
}

#[test]
fn sim_run_writes_track_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sim", "run", "--out", s(dir.path()), "--set", "sim.noiseless=true"];
    args.extend(SMALL_MISSION);
    ok(&args);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "completed");
    assert!(summary["waypoint_misses"].as_array().unwrap().iter().all(|m| m.as_f64().unwrap() <= 0.1));
    let track = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let samples = pengauge::rov::parse_trajectory_csv(&track).unwrap();
    assert!(samples.iter().filter(|s| s.capture).count() as u64 == summary["captures"].as_u64().unwrap());
    assert!(dir.path().join("ideal_track.csv").exists());
}

#[test]
fn label_export_writes_mask() {
    let dir = tempfile::tempdir().unwrap();
    let img = Image::from_fn(10, 6, |x, _| if x < 4 { [200, 10, 10] } else { [10, 10, 200] }).unwrap();
    let path = dir.path().join("pair.png");
    imaging::write_image(&path, &img).unwrap();
    let ds = dir.path().join("ds");
    let stdout = ok(&["label", "export", "--image", s(&path), "--dataset", s(&ds), "--k", "2", "--seed", "1", "--label", "0=cage", "--label", "1=sea"]);
    assert!(stdout.contains("60 labeled pixels"), "{stdout}");
    let mask = imaging::read_labeled_mask(Dataset::open(&ds).unwrap().mask_path("pair")).unwrap();
    assert_eq!(mask.classes()[0], mask.classes()[3]);
    assert_ne!(mask.classes()[0], mask.classes()[9]);

    let out = pengauge(&["label", "export", "--image", s(&path), "--dataset", s(&ds), "--k", "2", "--label", "0=kelp"]);
    assert!(!out.status.success());
}
