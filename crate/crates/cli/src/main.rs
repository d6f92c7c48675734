//! `pengauge` command-line entrypoint.
//!
//! Parameters come from an optional `key=value` config file, then
//! `PENGAUGE_*` environment variables, then `--set key=value` flags, then
//! the dedicated flags of each command. Failures print one JSON line
//! `{"error": kind, "message": text}` on stderr and exit with status 1.

mod masks;
mod params;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pengauge::cluster::{self, ClusterLegend, ColorSpace, DEFAULT_K};
use pengauge::config::Config;
use pengauge::dataset::{Dataset, ExampleMeta};
use pengauge::error::{Error, Result};
use pengauge::fouling::{estimate_mission, DistanceSource, MissionReport};
use pengauge::imaging::{self, write_atomic};
use pengauge::rov::{parse_trajectory_csv, run_mission};
use pengauge::segmentation::{split_dataset, train_and_evaluate, PixelClassifier};
use pengauge::synth::{self, render_scene, MissionRenderer};
use pengauge_label_server::{export_legend, load_working_image, parse_assignments, ServerConfig, DEFAULT_PORT};

use masks::{DirMasks, MaskKind};

#[derive(Parser)]
#[command(name = "pengauge", version, about = "Fish-pen net inspection toolkit")]
struct Cli {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// override a configuration key, e.g. --set scene.distance=1.5
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic scenes and missions
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run the ROV mission simulator
    #[command(subcommand)]
    Sim(SimCommand),
    /// Train the per-pixel classifier on a dataset
    Train(TrainArgs),
    /// Turn mission frames into binary net masks
    Segment(SegmentArgs),
    /// Estimate mission biofouling
    Estimate(EstimateArgs),
    /// Compare mission reports against the synthetic truth
    Evaluate(EvaluateArgs),
    /// Cluster-assisted labeling
    #[command(subcommand)]
    Label(LabelCommand),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// One frame with patches placed to reach scene.coverage
    Scene {
        #[arg(long)]
        out: PathBuf,
        /// dataset id of the frame (default scene-<seed>)
        #[arg(long)]
        id: Option<String>,
    },
    /// A simulated mission over a patched net, one frame per capture
    Mission {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Simulate the lawnmower mission and write its logs
    Run {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// classifier output file
    #[arg(long)]
    out: PathBuf,
    /// training report JSON (default: <out>.report.json)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    /// mission or dataset directory with frames/
    #[arg(long)]
    mission: PathBuf,
    #[arg(long, conflicts_with = "external_masks", required_unless_present = "external_masks")]
    classifier: Option<PathBuf>,
    /// directory of externally produced binary masks, <id>.png
    #[arg(long)]
    external_masks: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    mission: PathBuf,
    /// binary masks from `segment`; default is the ground-truth masks/ of the mission
    #[arg(long)]
    masks: Option<PathBuf>,
    /// disable both footage filters
    #[arg(long, conflicts_with_all = ["contour_filter", "movement_filter"])]
    no_filters: bool,
    /// enable only the filters named by these flags
    #[arg(long)]
    contour_filter: bool,
    #[arg(long)]
    movement_filter: bool,
    /// skip distance estimation and assume this range (m)
    #[arg(long)]
    fixed_distance: Option<f64>,
    /// directory for report.json and frames.csv (default: the mission dir)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// mission directories holding scenario.txt and a report
    #[arg(required = true)]
    missions: Vec<PathBuf>,
    /// report file name inside each mission directory
    #[arg(long, default_value = "report.json")]
    report: String,
    /// also write the table here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LabelCommand {
    /// Serve the labeling API and UI
    Serve {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// directory with the built UI
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[command(flatten)]
        tags: ExportTags,
    },
    /// Cluster an image and export the mask for a legend, without the server
    Export {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// dataset id (default: image file stem)
        #[arg(long)]
        id: Option<String>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = ColorSpace::Rgb)]
        colorspace: ColorSpace,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// cluster class, e.g. --label 0=sea --label 2=cage
        #[arg(long = "label", value_name = "INDEX=CLASS")]
        labels: Vec<String>,
        /// clusters to keep enabled (default: all)
        #[arg(long, value_delimiter = ',')]
        enabled: Option<Vec<usize>>,
        #[command(flatten)]
        tags: ExportTags,
    },
}

#[derive(Args)]
struct ExportTags {
    #[arg(long, default_value = "unknown")]
    year: String,
    #[arg(long, default_value = "unknown")]
    location: String,
    /// share of each axis kept by the centered working crop
    #[arg(long, default_value_t = 1.0)]
    crop: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let base = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mut cfg = base.with_env();
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth(SynthCommand::Scene { out, id }) => synth_scene(&cfg, &out, id),
        Command::Synth(SynthCommand::Mission { out }) => synth_mission(&cfg, &out),
        Command::Sim(SimCommand::Run { out }) => sim_run(&cfg, &out),
        Command::Train(a) => train(&cfg, a),
        Command::Segment(a) => segment(a),
        Command::Estimate(a) => estimate(&cfg, a),
        Command::Evaluate(a) => evaluate(a),
        Command::Label(LabelCommand::Serve {
            images,
            dataset,
            port,
            host,
            static_dir,
            tags,
        }) => label_serve(images, dataset, &host, port, static_dir, tags),
        Command::Label(LabelCommand::Export {
            image,
            dataset,
            id,
            k,
            colorspace,
            seed,
            labels,
            enabled,
            tags,
        }) => label_export(&image, &dataset, id, k, colorspace, seed, &labels, enabled, tags),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn synth_scene(cfg: &Config, out: &Path, id: Option<String>) -> Result<()> {
    let spec = params::scene_spec(cfg)?;
    let gt = render_scene(&spec)?;
    let id = id.unwrap_or_else(|| format!("scene-{}", spec.seed));
    synth::write_scene(out, &id, &spec, &gt)?;
    println!(
        "{id}: coverage {:.4} (target {:.4}), {} openings, distance {} m",
        gt.achieved_coverage,
        spec.target_coverage,
        gt.centers.len(),
        gt.distance
    );
    Ok(())
}

fn synth_mission(cfg: &Config, out: &Path) -> Result<()> {
    let scene = params::mission_scene(cfg)?;
    let plan = params::mission_plan(cfg, &scene)?;
    let sim = params::sim_config(cfg)?;
    let log = run_mission(&plan, &sim)?;
    let renderer = MissionRenderer::new(scene, &log.samples)?;
    let summary = synth::write_mission(out, &renderer, &log)?;
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "{} frames ({} on net), layout coverage {:.4}, mean frame coverage {:.4}",
        summary.frames, summary.on_net_frames, summary.layout_coverage, summary.mean_frame_coverage
    );
    Ok(())
}

#[derive(Serialize)]
struct SimSummary {
    status: pengauge::rov::MissionStatus,
    duration_s: f64,
    nominal_duration_s: f64,
    captures: usize,
    cross_track_rms: f64,
    waypoint_misses: Vec<f64>,
}

fn sim_run(cfg: &Config, out: &Path) -> Result<()> {
    let scene = params::mission_scene(cfg)?;
    let plan = params::mission_plan(cfg, &scene)?;
    let sim = params::sim_config(cfg)?;
    let log = run_mission(&plan, &sim)?;
    fs::create_dir_all(out)?;
    write_atomic(out.join("trajectory.csv"), log.to_csv().as_bytes())?;
    write_atomic(out.join("ideal_track.csv"), log.ideal_track_csv().as_bytes())?;
    let summary = SimSummary {
        status: log.status,
        duration_s: log.duration(),
        nominal_duration_s: log.nominal_duration,
        captures: log.captures().count(),
        cross_track_rms: log.cross_track_rms(),
        waypoint_misses: log.waypoint_misses(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "{:?} after {:.1} s, {} captures, cross-track rms {:.3} m",
        summary.status, summary.duration_s, summary.captures, summary.cross_track_rms
    );
    Ok(())
}

fn train(cfg: &Config, a: TrainArgs) -> Result<()> {
    let tc = params::train_config(cfg)?;
    let ratio: f64 = cfg.get_or("train.split", 0.8)?;
    let ds = Dataset::open(&a.dataset)?;
    let entries = ds.entries()?;
    let (train_ids, test_ids) = split_dataset(&entries, ratio, tc.seed)?;
    let load = |ids: &[pengauge::dataset::DatasetEntry]| -> Result<Vec<_>> { ids.iter().map(|e| ds.load(&e.id)).collect() };
    let (clf, report) = train_and_evaluate(&load(&train_ids)?, &load(&test_ids)?, &tc)?;
    clf.save(&a.out)?;
    let report_path = a.report.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report.json");
        p.into()
    });
    write_json(&report_path, &report)?;
    println!(
        "held-out accuracy {:.4}, dice {:.4} ({} train / {} test frames)",
        report.test_accuracy,
        report.test_dice,
        train_ids.len(),
        test_ids.len()
    );
    Ok(())
}

fn frame_ids(dir: &Path) -> Result<Vec<String>> {
    let mut ids: Vec<String> = fs::read_dir(dir.join("frames"))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok()?.strip_suffix(".png").map(str::to_string))
        .collect();
    ids.sort();
    Ok(ids)
}

fn segment(a: SegmentArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let ids = frame_ids(&a.mission)?;
    let classifier = a.classifier.as_ref().map(PixelClassifier::load).transpose()?;
    for id in &ids {
        let frame = imaging::read_image(a.mission.join("frames").join(format!("{id}.png")))?;
        let mask = match (&classifier, &a.external_masks) {
            (Some(c), _) => c.predict_mask(&frame),
            (None, Some(dir)) => {
                pengauge::segmentation::ingest_external_mask(dir.join(format!("{id}.png")), frame.dims())?
            }
            (None, None) => unreachable!("clap requires one mask source"),
        };
        imaging::write_mask(a.out.join(format!("{id}.png")), &mask)?;
    }
    println!("{} masks written to {}", ids.len(), a.out.display());
    Ok(())
}

fn estimate(cfg: &Config, a: EstimateArgs) -> Result<()> {
    let mut ec = params::estimate_config(cfg)?;
    if a.no_filters {
        ec.contour_filter = false;
        ec.movement_filter = false;
    } else if a.contour_filter || a.movement_filter {
        ec.contour_filter = a.contour_filter;
        ec.movement_filter = a.movement_filter;
    }
    if let Some(d) = a.fixed_distance {
        ec.distance = DistanceSource::Fixed(d);
    }
    let frames = synth::read_captures(a.mission.join("captures.tsv"))?;
    let track = parse_trajectory_csv(&fs::read_to_string(a.mission.join("trajectory.csv"))?)?;
    let mut source = match &a.masks {
        Some(dir) => DirMasks::new(dir.clone(), MaskKind::Binary, frames),
        None => DirMasks::new(a.mission.join("masks"), MaskKind::Labeled, frames),
    };
    let report = estimate_mission(&mut source, Some(&track), &ec)?;
    let out = a.out.unwrap_or_else(|| a.mission.clone());
    fs::create_dir_all(&out)?;
    write_atomic(out.join("report.json"), report.to_json().as_bytes())?;
    write_atomic(out.join("frames.csv"), report.frames_csv().as_bytes())?;
    print!("{}", report.summary_table());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut table = String::from("scenario,actual,estimated,abs_error\n");
    let mut errors = Vec::new();
    for dir in &a.missions {
        let scenario = Config::load(dir.join("scenario.txt"))?;
        let actual: f64 = scenario.require("layout_coverage")?;
        let report = MissionReport::from_json(&fs::read_to_string(dir.join(&a.report))?)?;
        let err = (report.mean_fouling - actual).abs();
        errors.push(err);
        let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        table += &format!("{name},{:.2},{:.2},{:.2}\n", actual * 100.0, report.mean_fouling * 100.0, err * 100.0);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    table += &format!("mean,,,{:.2}\n", mean * 100.0);
    if let Some(p) = &a.out {
        write_atomic(p, table.as_bytes())?;
    }
    print!("{table}");
    Ok(())
}

fn label_serve(
    images: PathBuf,
    dataset: PathBuf,
    host: &str,
    port: u16,
    static_dir: Option<PathBuf>,
    tags: ExportTags,
) -> Result<()> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Error::Config(format!("bad listen address {host}:{port}: {e}")))?;
    let mut cfg = ServerConfig::new(images, dataset);
    cfg.static_dir = static_dir;
    cfg.crop_fraction = tags.crop;
    cfg.year = tags.year;
    cfg.location = tags.location;
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    rt.block_on(pengauge_label_server::serve(cfg, addr))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn label_export(
    image: &Path,
    dataset: &Path,
    id: Option<String>,
    k: usize,
    colorspace: ColorSpace,
    seed: u64,
    labels: &[String],
    enabled: Option<Vec<usize>>,
    tags: ExportTags,
) -> Result<()> {
    let stem = image
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("not an image path: {}", image.display())))?;
    let dir = image.parent().unwrap_or(Path::new("."));
    let (img, crop) = load_working_image(dir, stem, tags.crop)?;
    let model = cluster::kmeans(&img, k, colorspace, seed)?;
    let mut legend = ClusterLegend::from_model(&model);
    let body = labels
        .iter()
        .map(|kv| {
            let (i, c) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--label expects INDEX=CLASS, got `{kv}`")))?;
            Ok((i.trim().to_string(), Some(c.trim().to_string())))
        })
        .collect::<Result<_>>()?;
    for (index, class) in parse_assignments(&body)? {
        legend.assign(index, class)?;
    }
    if let Some(list) = enabled {
        legend.set_enabled(&list)?;
    }
    if !legend.has_assignments() {
        return Err(Error::InvalidArgument("no enabled cluster has a class assigned".into()));
    }
    let ds = Dataset::create(dataset)?;
    let meta = ExampleMeta {
        id: id.unwrap_or_else(|| stem.to_string()),
        year: tags.year,
        location: tags.location,
        crop,
    };
    let entry = export_legend(&ds, &meta, &img, &model, &legend)?;
    println!("{}: {} labeled pixels -> {}", entry.id, entry.labeled_pixels, ds.mask_path(&entry.id).display());
    Ok(())
}
