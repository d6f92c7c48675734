//! End-to-end acceptance suite on synthetic data.
//!
//! Every criterion is computed by `run_suite`, which is then run a second
//! time with the same seeds to check that every reported number repeats
//! bit for bit. One PASS/FAIL line is printed per criterion.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pengauge::cluster::{kmeans, ColorSpace};
use pengauge::fouling::{estimate_mission, EstimateConfig, MissionReport};
use pengauge::geometry::{detect_mesh_centers, estimate_distance, estimate_pitch_px, CameraModel, NetSpec};
use pengauge::imaging::{BinaryMask, Image, LabeledMask};
use pengauge::rov::{run_mission, MissionPlan, MissionState, MissionStatus, SensorModel, SimConfig, SpeedJitter};
use pengauge::segmentation::{
    dice, log_loss, log_loss_gradient, split_dataset, train_and_evaluate, PixelClassifier, TrainConfig,
    TrainingSet,
};
use pengauge::synth::{
    render_scene, Degradation, MissionFrames, MissionRenderer, MissionSceneSpec, SceneSpec, Segmentation,
};

struct Verdict {
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Suite {
    verdicts: Vec<(u32, &'static str, Verdict)>,
    /// every number the criteria report, in a fixed order
    numbers: Vec<f64>,
}

impl Suite {
    fn record(&mut self, id: u32, name: &'static str, pass: bool, detail: String) {
        self.verdicts.push((id, name, Verdict { pass, detail }));
    }
}

fn labeled_scenes() -> Vec<(Image, LabeledMask)> {
    let coverages = [0.0, 0.22, 0.33, 0.44, 0.66];
    (0..20u64)
        .map(|k| {
            let spec = SceneSpec {
                distance: if k % 2 == 0 { 1.0 } else { 1.5 },
                target_coverage: coverages[k as usize % coverages.len()],
                seed: 500 + k,
                ..SceneSpec::default()
            };
            let gt = render_scene(&spec).expect("training scene");
            let mask = gt.labeled_mask();
            (gt.frame, mask)
        })
        .collect()
}

struct MissionRun {
    actual: f64,
    reports: Vec<MissionReport>,
}

/// Simulates a mission over a patched net and estimates it under each
/// estimator configuration, segmenting every frame once.
fn mission(
    coverage: f64,
    standoff: f64,
    degradation: Degradation,
    jitter: Option<SpeedJitter>,
    seed: u64,
    segmentation: Segmentation,
    configs: &[EstimateConfig],
) -> MissionRun {
    let scene = MissionSceneSpec {
        target_coverage: coverage,
        seed,
        degradation,
        ..MissionSceneSpec::default()
    };
    let plan = scene.inspection_plan(standoff);
    let sim = SimConfig {
        seed,
        jitter,
        ..SimConfig::default()
    };
    let log = run_mission(&plan, &sim).expect("mission runs");
    let renderer = MissionRenderer::new(scene, &log.samples).expect("renderer");
    let mut masks = MissionFrames::new(&renderer, segmentation).collect().expect("masks");
    let reports = configs
        .iter()
        .map(|cfg| estimate_mission(&mut masks, Some(&log.samples), cfg).expect("estimate"))
        .collect();
    MissionRun {
        actual: renderer.layout().coverage(),
        reports,
    }
}

fn criterion_1(s: &mut Suite, lr: &PixelClassifier) {
    let start = Instant::now();
    let cfg = EstimateConfig::default();
    let mut oracle_ok = true;
    let mut lr_errors = Vec::new();
    let mut detail = String::new();
    for (k, &c) in [0.22, 0.33, 0.44, 0.66].iter().enumerate() {
        let seed = 10 + k as u64;
        let gt = mission(c, 1.0, Degradation::default(), None, seed, Segmentation::GroundTruth, std::slice::from_ref(&cfg));
        let est_gt = gt.reports[0].mean_fouling;
        let run = mission(
            c,
            1.0,
            Degradation::default(),
            None,
            seed,
            Segmentation::Classifier(lr.clone()),
            std::slice::from_ref(&cfg),
        );
        let est_lr = run.reports[0].mean_fouling;
        let (e_gt, e_lr) = ((est_gt - gt.actual).abs(), (est_lr - run.actual).abs());
        oracle_ok &= e_gt <= 0.02;
        lr_errors.push(e_lr);
        s.numbers.extend([gt.actual, est_gt, est_lr]);
        detail += &format!(
            "{:.0}%: actual {:.2} oracle {:.2} lr {:.2}; ",
            c * 100.0,
            gt.actual * 100.0,
            est_gt * 100.0,
            est_lr * 100.0
        );
    }
    let mean_lr = lr_errors.iter().sum::<f64>() / lr_errors.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    detail += &format!("lr mean abs error {:.2} pts, {secs:.0} s", mean_lr * 100.0);
    s.record(1, "coverage missions", oracle_ok && mean_lr <= 0.05 && secs <= 300.0, detail);
}

fn criterion_2(s: &mut Suite, lr: &PixelClassifier) {
    let base = EstimateConfig::default();
    let configs = [
        base.clone().unfiltered(),
        EstimateConfig {
            movement_filter: false,
            ..base.clone()
        },
        EstimateConfig {
            contour_filter: false,
            ..base.clone()
        },
        base,
    ];
    let degradation = Degradation {
        blur_sigma: 2.0,
        skew: 0.1,
        ..Degradation::default()
    };
    let run = mission(
        0.66,
        1.5,
        degradation,
        Some(SpeedJitter::default()),
        20,
        Segmentation::Classifier(lr.clone()),
        &configs,
    );
    let err: Vec<f64> = run.reports.iter().map(|r| (r.mean_fouling - run.actual).abs()).collect();
    s.numbers.extend(run.reports.iter().map(|r| r.mean_fouling));
    let pass = err[3] <= err[0] && err[1] <= err[0] + 0.005 && err[2] <= err[0] + 0.005;
    s.record(
        2,
        "footage filters on degraded mission",
        pass,
        format!(
            "actual {:.2}; abs error none {:.2} contour {:.2} movement {:.2} both {:.2} pts",
            run.actual * 100.0,
            err[0] * 100.0,
            err[1] * 100.0,
            err[2] * 100.0,
            err[3] * 100.0
        ),
    );
}

fn criterion_3(s: &mut Suite) {
    let mut pass = true;
    let mut detail = String::new();
    for (k, &d) in [0.8, 1.0, 1.5].iter().enumerate() {
        let gt = render_scene(&SceneSpec {
            distance: d,
            seed: 30 + k as u64,
            ..SceneSpec::default()
        })
        .expect("scene");
        let est = estimate_pitch_px(&detect_mesh_centers(&gt.net_mask))
            .and_then(|p| estimate_distance(p, &NetSpec::default(), &CameraModel::synthetic()));
        match est {
            Ok(e) => {
                let rel = (e - d).abs() / d;
                pass &= rel <= 0.10;
                s.numbers.push(e);
                detail += &format!("{d} m -> {e:.4} m; ");
            }
            Err(e) => {
                pass = false;
                detail += &format!("{d} m -> {e}; ");
            }
        }
    }
    s.record(3, "distance estimation", pass, detail);
}

fn brute_dice(a: &BinaryMask, b: &BinaryMask) -> f64 {
    use std::collections::BTreeSet;
    let set = |m: &BinaryMask| -> BTreeSet<usize> {
        m.bits().iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i).collect()
    };
    let (sa, sb) = (set(a), set(b));
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    2.0 * sa.intersection(&sb).count() as f64 / (sa.len() + sb.len()) as f64
}

fn criterion_4(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut exact, mut symmetric, mut self_one) = (0, 0, 0);
    for _ in 0..1000 {
        let pa: f64 = rng.random();
        let pb: f64 = rng.random();
        let a = BinaryMask::from_fn(16, 16, |_, _| rng.random::<f64>() < pa).unwrap();
        let b = BinaryMask::from_fn(16, 16, |_, _| rng.random::<f64>() < pb).unwrap();
        let d = dice(&a, &b).unwrap();
        exact += (d == brute_dice(&a, &b)) as usize;
        symmetric += (d == dice(&b, &a).unwrap()) as usize;
        self_one += (dice(&a, &a).unwrap() == 1.0) as usize;
    }
    s.numbers.extend([exact as f64, symmetric as f64, self_one as f64]);
    s.record(
        4,
        "dice oracle",
        exact == 1000 && symmetric == 1000 && self_one == 1000,
        format!("exact {exact}/1000, symmetric {symmetric}/1000, self {self_one}/1000"),
    );
}

fn criterion_5(s: &mut Suite) {
    let mut monotone = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Image::from_fn(24, 24, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let k = 1 + (seed as usize % 8);
        let space = if seed % 2 == 0 { ColorSpace::Rgb } else { ColorSpace::Lab };
        let m = kmeans(&img, k, space, seed).unwrap();
        if m.objective_history.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
        s.numbers.push(m.objective());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let img = Image::from_fn(20, 15, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
    let m = kmeans(&img, 1, ColorSpace::Rgb, 0).unwrap();
    let n = img.pixels().len() as f64;
    let mut mean = [0.0; 3];
    for p in img.pixels() {
        let f = ColorSpace::Rgb.features(*p);
        (0..3).for_each(|i| mean[i] += f[i] / n);
    }
    let mean_err = (0..3).map(|i| (m.centroids[0][i] - mean[i]).abs()).fold(0.0, f64::max);

    let two = Image::from_fn(16, 16, |x, y| if (x + y) % 3 == 0 { [200, 30, 30] } else { [10, 90, 220] }).unwrap();
    let q = kmeans(&two, 2, ColorSpace::Rgb, 7).unwrap().objective();
    s.numbers.extend([mean_err, q]);
    s.record(
        5,
        "k-means",
        monotone == 100 && mean_err <= 1e-9 && q == 0.0,
        format!("monotone {monotone}/100, k=1 centroid error {mean_err:.1e}, two-color objective {q}"),
    );
}

fn criterion_6(s: &mut Suite, scenes: &[(Image, LabeledMask)]) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let set = TrainingSet {
        features: (0..100).map(|_| [rng.random(), rng.random(), rng.random()]).collect(),
        targets: (0..100).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect(),
    };
    let w = [0.0; 4].map(|_: f64| rng.random_range(-3.0..3.0));
    let g = log_loss_gradient(&w, &set);
    let h = 1e-6;
    let mut max_diff: f64 = 0.0;
    for i in 0..4 {
        let (mut wp, mut wm) = (w, w);
        wp[i] += h;
        wm[i] -= h;
        let fd = (log_loss(&wp, &set) - log_loss(&wm, &set)) / (2.0 * h);
        max_diff = max_diff.max((fd - g[i]).abs());
    }

    let (train, test) = split_dataset(scenes, 0.8, 6).unwrap();
    let (_, report) = train_and_evaluate(&train, &test, &TrainConfig::default()).unwrap();
    s.numbers.extend([max_diff, report.test_accuracy, report.test_dice]);
    s.record(
        6,
        "logistic regression",
        max_diff < 1e-5 && report.test_accuracy >= 0.95,
        format!(
            "gradient max diff {max_diff:.1e}; held-out accuracy {:.4} dice {:.4} on {} frames",
            report.test_accuracy,
            report.test_dice,
            test.len()
        ),
    );
}

fn criterion_7(s: &mut Suite) {
    let plan = MissionPlan::default();
    let clean = run_mission(&plan, &SimConfig::noiseless()).unwrap();
    let worst_miss = clean.waypoint_misses().into_iter().fold(0.0, f64::max);
    let done = clean.status == MissionStatus::Completed && clean.samples.last().map(|s| s.state) == Some(MissionState::Done);

    let noisy = run_mission(
        &plan,
        &SimConfig {
            sensor: SensorModel::default(),
            seed: 7,
            ..SimConfig::default()
        },
    )
    .unwrap();
    let rms = noisy.cross_track_rms();
    let minutes = noisy.duration() / 60.0;

    // spacing between consecutive captures of the same transect
    let mut worst_gap: f64 = 0.0;
    for log in [&clean, &noisy] {
        let mut prev: Option<(f64, usize)> = None;
        for smp in log.captures() {
            if let Some((t, w)) = prev {
                if w == smp.active_waypoint {
                    worst_gap = worst_gap.max((smp.t - t - 1.0).abs());
                }
            }
            prev = Some((smp.t, smp.active_waypoint));
        }
    }
    s.numbers.extend([worst_miss, rms, minutes, worst_gap]);
    s.record(
        7,
        "control loop",
        worst_miss <= 0.1 && done && rms <= 0.3 && (10.0..=25.0).contains(&minutes) && worst_gap <= 0.01,
        format!(
            "worst waypoint miss {worst_miss:.3} m, done {done}; noisy cross-track rms {rms:.3} m, {minutes:.1} min; capture spacing error {worst_gap:.3} s"
        ),
    );
}

fn criterion_8(s: &mut Suite, lr: &PixelClassifier) {
    let cfg = EstimateConfig::default();
    let lr_seg = || Segmentation::Classifier(lr.clone());
    let clean = mission(0.0, 1.0, Degradation::default(), None, 80, lr_seg(), std::slice::from_ref(&cfg));
    let clean_est = clean.reports[0].mean_fouling;

    let tilted = Degradation {
        blur_sigma: 2.0,
        skew: 0.1,
        ..Degradation::default()
    };
    let flat = Degradation { skew: 0.0, ..tilted };
    let jitter = Some(SpeedJitter::default());
    let flat_run = mission(0.0, 1.5, flat, jitter, 81, lr_seg(), std::slice::from_ref(&cfg));
    let skew_run = mission(0.0, 1.5, tilted, jitter, 81, lr_seg(), &[cfg.clone().unfiltered(), cfg]);
    let flat_est = flat_run.reports[0].mean_fouling;
    let (skew_raw, skew_filtered) = (skew_run.reports[0].mean_fouling, skew_run.reports[1].mean_fouling);
    s.numbers.extend([clean_est, flat_est, skew_raw, skew_filtered]);
    s.record(
        8,
        "clean-net regression",
        clean_est <= 0.05 && skew_filtered > flat_est && skew_raw > flat_est && skew_filtered < skew_raw,
        format!(
            "clean {:.2}%; flat {:.2}%; skewed unfiltered {:.2}% filtered {:.2}%",
            clean_est * 100.0,
            flat_est * 100.0,
            skew_raw * 100.0,
            skew_filtered * 100.0
        ),
    );
}

fn run_suite() -> Suite {
    let mut s = Suite::default();
    let scenes = labeled_scenes();
    let set = TrainingSet::from_examples(scenes.iter().map(|(i, m)| (i, m)), ColorSpace::Rgb).unwrap();
    let lr = pengauge::segmentation::train_logreg(&set, &TrainConfig::default())
        .unwrap()
        .classifier;
    s.numbers.extend(lr.weights);
    criterion_1(&mut s, &lr);
    criterion_2(&mut s, &lr);
    criterion_3(&mut s);
    criterion_4(&mut s);
    criterion_5(&mut s);
    criterion_6(&mut s, &scenes);
    criterion_7(&mut s);
    criterion_8(&mut s, &lr);
    s
}

#[test]
fn acceptance() {
    let first = run_suite();
    let second = run_suite();
    let same = first.numbers.len() == second.numbers.len()
        && first
            .numbers
            .iter()
            .zip(&second.numbers)
            .all(|(a, b)| a.to_bits() == b.to_bits());

    let mut failed = Vec::new();
    for (id, name, v) in &first.verdicts {
        println!("[{}] criterion {id} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(*id);
        }
    }
    println!(
        "[{}] criterion 9 (determinism): {} reported numbers, identical on rerun: {same}",
        if same { "PASS" } else { "FAIL" },
        first.numbers.len()
    );
    if !same {
        failed.push(9);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
