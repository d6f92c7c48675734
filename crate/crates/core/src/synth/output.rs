//! Writing scenes and missions into the dataset layout.
//!
//! Besides the dataset files a mission directory holds:
//!
//! ```text
//! truth.tsv          id  distance  achieved_coverage  center_count
//! captures.tsv       id  t  off_net
//! trajectory.csv     full simulator log
//! ideal_track.csv    waypoints
//! scenario.txt       key=value description, including layout_coverage
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dataset::{Dataset, ExampleMeta};
use crate::error::{Error, Result};
use crate::fouling::FrameInfo;
use crate::imaging::{write_atomic, CropRect};
use crate::rov::MissionLog;

use super::{GroundTruth, MissionRenderer, SceneSpec};

pub const TRUTH_FILE: &str = "truth.tsv";
pub const TRUTH_HEADER: &str = "id\tdistance\tachieved_coverage\tcenter_count";
pub const CAPTURES_FILE: &str = "captures.tsv";
pub const CAPTURES_HEADER: &str = "id\tt\toff_net";

fn truth_line(id: &str, gt: &GroundTruth) -> String {
    format!("{id}\t{}\t{}\t{}", gt.distance, gt.achieved_coverage, gt.centers.len())
}

/// Replaces or appends the truth row of each id.
fn upsert_truth(dir: &Path, rows: &[(String, String)]) -> Result<()> {
    let path = dir.join(TRUTH_FILE);
    let mut lines: Vec<String> = match fs::read_to_string(&path) {
        Ok(text) => text.lines().skip(1).filter(|l| !l.trim().is_empty()).map(str::to_string).collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    for (id, line) in rows {
        let prefix = format!("{id}\t");
        match lines.iter_mut().find(|l| l.starts_with(&prefix)) {
            Some(l) => *l = line.clone(),
            None => lines.push(line.clone()),
        }
    }
    let mut out = format!("{TRUTH_HEADER}\n");
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn meta(id: &str, location: &str, gt: &GroundTruth) -> ExampleMeta {
    ExampleMeta {
        id: id.to_string(),
        year: "synthetic".into(),
        location: location.into(),
        crop: CropRect::full(gt.frame.width(), gt.frame.height()),
    }
}

/// Adds a rendered scene to the dataset at `dir` under `id`.
pub fn write_scene(dir: impl AsRef<Path>, id: &str, spec: &SceneSpec, gt: &GroundTruth) -> Result<()> {
    let dir = dir.as_ref();
    let ds = Dataset::create(dir)?;
    ds.upsert_example(&meta(id, "scene", gt), &gt.frame, &gt.labeled_mask())?;
    upsert_truth(dir, &[(id.to_string(), truth_line(id, gt))])?;
    fs::create_dir_all(dir.join("scenes"))?;
    let spec_json = serde_json::to_string_pretty(spec).expect("spec serializes");
    write_atomic(dir.join("scenes").join(format!("{id}.json")), spec_json.as_bytes())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub frames: usize,
    pub on_net_frames: usize,
    /// patched share of all slots
    pub layout_coverage: f64,
    /// mean true coverage of the on-net frames
    pub mean_frame_coverage: f64,
}

/// Renders every capture of a mission into `dir`.
pub fn write_mission(dir: impl AsRef<Path>, renderer: &MissionRenderer, log: &MissionLog) -> Result<MissionSummary> {
    let dir = dir.as_ref();
    let ds = Dataset::create(dir)?;
    let mut truth = Vec::new();
    let mut captures = format!("{CAPTURES_HEADER}\n");
    let mut sum = 0.0;
    let mut on_net = 0;
    for (k, c) in renderer.captures().iter().enumerate() {
        let gt = renderer.render(k)?;
        ds.upsert_example(&meta(&c.id, "mission", &gt), &gt.frame, &gt.labeled_mask())?;
        truth.push((c.id.clone(), truth_line(&c.id, &gt)));
        writeln!(captures, "{}\t{}\t{}", c.id, c.t, c.off_net as u8).unwrap();
        if !c.off_net {
            sum += gt.achieved_coverage;
            on_net += 1;
        }
    }
    upsert_truth(dir, &truth)?;
    write_atomic(dir.join(CAPTURES_FILE), captures.as_bytes())?;
    write_atomic(dir.join("trajectory.csv"), log.to_csv().as_bytes())?;
    write_atomic(dir.join("ideal_track.csv"), log.ideal_track_csv().as_bytes())?;

    let summary = MissionSummary {
        frames: renderer.captures().len(),
        on_net_frames: on_net,
        layout_coverage: renderer.layout().coverage(),
        mean_frame_coverage: if on_net == 0 { 0.0 } else { sum / on_net as f64 },
    };
    let spec = renderer.spec();
    let mut scenario = Config::default();
    scenario.set("target_coverage", spec.target_coverage);
    scenario.set("layout_coverage", summary.layout_coverage);
    scenario.set("mean_frame_coverage", summary.mean_frame_coverage);
    scenario.set("seed", spec.seed);
    scenario.set("standoff", log.plan.standoff);
    scenario.set("net.pitch", spec.net.pitch);
    scenario.set("net.twine", spec.net.twine);
    scenario.set("degrade.blur", spec.degradation.blur_sigma);
    scenario.set("degrade.gradient", spec.degradation.brightness_gradient);
    scenario.set("degrade.skew", spec.degradation.skew);
    scenario.set("degrade.noise", spec.degradation.noise_sigma);
    scenario.set("frames", summary.frames);
    scenario.set("status", format!("{:?}", log.status).to_lowercase());
    write_atomic(dir.join("scenario.txt"), scenario.to_text().as_bytes())?;
    Ok(summary)
}

/// Reads `captures.tsv`.
pub fn read_captures(path: impl AsRef<Path>) -> Result<Vec<FrameInfo>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(CAPTURES_HEADER) {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || Error::Parse(format!("{}:{}: malformed capture row `{l}`", path.display(), i + 2));
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            Ok(FrameInfo {
                id: f[0].to_string(),
                t: f[1].parse().map_err(|_| bad())?,
                off_net: match f[2] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
            })
        })
        .collect()
}
