//! Ground-truth net scenes: a planar net with grid-aligned square patches
//! standing in for biofouling, seen through the pinhole camera.
//!
//! Masks are produced before any degradation, so they stay exact while the
//! frames get blurred, sheared, unevenly lit and noisy.

mod mission;
mod output;
mod view;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fouling::frame_coverage;
use crate::geometry::{CameraModel, NetSpec};
use crate::imaging::{BinaryMask, Image, LabeledMask, Rgb};

pub use mission::{
    CaptureView, MissionFrames, MissionRenderer, MissionSceneSpec, PatchLayout, Segmentation,
};
pub use output::{read_captures, write_mission, write_scene, MissionSummary};
pub use view::{PatchLookup, Raster, View};

/// Smallest projected pitch the renderer accepts (px).
pub const MIN_PITCH_PX: f64 = 4.0;
/// Largest allowed gap between achieved and requested scene coverage.
pub const COVERAGE_TOLERANCE: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub water_top: Rgb,
    pub water_bottom: Rgb,
    pub net: Rgb,
    pub patch_dark: Rgb,
    pub patch_light: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            water_top: [40, 130, 190],
            water_bottom: [20, 80, 140],
            net: [55, 55, 60],
            patch_dark: [150, 110, 50],
            patch_light: [190, 160, 70],
        }
    }
}

/// Image-space corruptions applied after the masks are fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    /// Gaussian blur sigma (px)
    pub blur_sigma: f64,
    /// relative brightness change from the frame center to either side
    pub brightness_gradient: f64,
    /// horizontal shear per row, a stand-in for a tilted heading
    pub skew: f64,
    /// additive Gaussian sensor noise (8-bit levels)
    pub noise_sigma: f64,
}

impl Default for Degradation {
    fn default() -> Self {
        Self {
            blur_sigma: 0.8,
            brightness_gradient: 0.15,
            skew: 0.0,
            noise_sigma: 3.0,
        }
    }
}

impl Degradation {
    pub fn none() -> Self {
        Self {
            blur_sigma: 0.0,
            brightness_gradient: 0.0,
            skew: 0.0,
            noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.blur_sigma >= 0.0
            && self.noise_sigma >= 0.0
            && self.brightness_gradient.abs() < 1.0
            && self.skew.is_finite()
            && self.blur_sigma.is_finite()
            && self.noise_sigma.is_finite();
        if !ok {
            return Err(invalid(format!("invalid degradation: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub net: NetSpec,
    pub cam: CameraModel,
    /// m
    pub distance: f64,
    /// side of a square patch (m)
    pub patch_size: f64,
    pub target_coverage: f64,
    pub seed: u64,
    pub degradation: Degradation,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            net: NetSpec::default(),
            cam: CameraModel::synthetic(),
            distance: 1.0,
            patch_size: 0.25,
            target_coverage: 0.0,
            seed: 0,
            degradation: Degradation::default(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.cam.validate()?;
        self.degradation.validate()?;
        if !(0.0..=1.0).contains(&self.target_coverage) {
            return Err(invalid(format!(
                "target coverage must be in [0, 1], got {}",
                self.target_coverage
            )));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(invalid(format!("distance must be positive, got {}", self.distance)));
        }
        patch_cells(self.patch_size, &self.net)?;
        Ok(())
    }
}

/// Patch side in whole mesh cells.
pub(crate) fn patch_cells(patch_size: f64, net: &NetSpec) -> Result<i64> {
    let cells = (patch_size / net.pitch).round();
    if !(cells >= 1.0) {
        return Err(invalid(format!(
            "patch size {patch_size} m is smaller than one mesh cell"
        )));
    }
    Ok(cells as i64)
}

pub(crate) fn check_resolvable(distance: f64, net: &NetSpec, cam: &CameraModel) -> Result<()> {
    let pitch_px = cam.focal_px() * net.pitch / distance;
    if pitch_px < MIN_PITCH_PX {
        return Err(Error::Unresolvable { pitch_px });
    }
    Ok(())
}

/// Independent random stream `stream` derived from a user seed.
pub(crate) fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub frame: Image,
    /// net and patches
    pub net_mask: BinaryMask,
    /// net only
    pub clean_mask: BinaryMask,
    /// centers of the openings wholly inside the frame, patched or not
    pub centers: Vec<(f64, f64)>,
    /// patched share of the open mesh area
    pub achieved_coverage: f64,
    pub distance: f64,
}

impl GroundTruth {
    pub fn labeled_mask(&self) -> LabeledMask {
        LabeledMask::from_binary(&self.net_mask)
    }
}

/// Placed patches, as the lowest cell index of each square.
struct PatchSet {
    side: i64,
    origins: Vec<(i64, i64)>,
}

impl PatchSet {
    fn overlaps(&self, o: (i64, i64)) -> bool {
        self.origins
            .iter()
            .any(|p| (p.0 - o.0).abs() < self.side && (p.1 - o.1).abs() < self.side)
    }
}

impl PatchLookup for PatchSet {
    fn is_patched(&self, i: i64, j: i64) -> bool {
        self.origins
            .iter()
            .any(|p| (p.0..p.0 + self.side).contains(&i) && (p.1..p.1 + self.side).contains(&j))
    }
}

/// Open (non-twine) pixel counts per visible cell.
struct OpenCells {
    i0: i64,
    j0: i64,
    cols: usize,
    rows: usize,
    counts: Vec<u64>,
    total: u64,
}

impl OpenCells {
    fn count(raster: &Raster) -> Self {
        let (mut i0, mut i1, mut j0, mut j1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        raster.for_each(|_, _, _, (i, j)| {
            i0 = i0.min(i);
            i1 = i1.max(i);
            j0 = j0.min(j);
            j1 = j1.max(j);
        });
        let cols = (i1 - i0 + 1) as usize;
        let rows = (j1 - j0 + 1) as usize;
        let mut counts = vec![0u64; cols * rows];
        let mut total = 0;
        raster.for_each(|_, _, twine, (i, j)| {
            if !twine {
                counts[(j - j0) as usize * cols + (i - i0) as usize] += 1;
                total += 1;
            }
        });
        Self {
            i0,
            j0,
            cols,
            rows,
            counts,
            total,
        }
    }

    /// Open pixels inside the square patch at `o`.
    fn under(&self, o: (i64, i64), side: i64) -> u64 {
        let clip = |lo: i64, base: i64, n: usize| {
            let a = (lo - base).max(0);
            let b = (lo + side - base).min(n as i64);
            (a, b)
        };
        let (a, b) = clip(o.0, self.i0, self.cols);
        let (c, d) = clip(o.1, self.j0, self.rows);
        let mut sum = 0;
        for r in c..d {
            let row = &self.counts[r as usize * self.cols..][..self.cols];
            sum += row[a.max(0) as usize..b.max(a) as usize].iter().sum::<u64>();
        }
        sum
    }
}

/// Greedy seeded placement: repeatedly add the non-overlapping patch that
/// brings the coverage closest to the target, until within half the
/// tolerance or nothing improves. A few shuffled restarts break ties
/// differently when the first run stalls.
fn place_patches(cells: &OpenCells, side: i64, target: f64, seed: u64) -> (PatchSet, f64) {
    let mut candidates = Vec::new();
    for j in cells.j0 - side + 1..cells.j0 + cells.rows as i64 {
        for i in cells.i0 - side + 1..cells.i0 + cells.cols as i64 {
            candidates.push((i, j));
        }
    }
    let total = cells.total.max(1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(PatchSet, f64)> = None;
    for _ in 0..4 {
        candidates.shuffle(&mut rng);
        let mut set = PatchSet {
            side,
            origins: Vec::new(),
        };
        let mut covered = 0u64;
        loop {
            let err = (covered as f64 / total - target).abs();
            if err <= COVERAGE_TOLERANCE / 2.0 {
                break;
            }
            let mut pick: Option<((i64, i64), u64, f64)> = None;
            for &o in &candidates {
                let gain = cells.under(o, side);
                if gain == 0 || set.overlaps(o) {
                    continue;
                }
                let e = ((covered + gain) as f64 / total - target).abs();
                if e < pick.map_or(err, |p| p.2) {
                    pick = Some((o, gain, e));
                }
            }
            match pick {
                Some((o, gain, _)) => {
                    set.origins.push(o);
                    covered += gain;
                }
                None => break,
            }
        }
        let achieved = covered as f64 / total;
        let err = (achieved - target).abs();
        if best.as_ref().is_none_or(|b| err < (b.1 - target).abs()) {
            best = Some((set, achieved));
        }
        if err <= COVERAGE_TOLERANCE / 2.0 {
            break;
        }
    }
    best.expect("at least one attempt")
}

/// Renders a single frame of an unbounded net with patches placed to hit
/// the target coverage.
pub fn render_scene(spec: &SceneSpec) -> Result<GroundTruth> {
    spec.validate()?;
    check_resolvable(spec.distance, &spec.net, &spec.cam)?;
    let side = patch_cells(spec.patch_size, &spec.net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, 1));
    // The reachable coverages depend on how the cell grid falls in the
    // frame, so a few seeded view offsets are tried.
    let mut best: Option<(View, Raster, PatchSet, f64)> = None;
    for attempt in 0..32 {
        // frame center somewhere inside cell (1000, 1000)
        let view = View {
            cx: (1000.0 + rng.random::<f64>()) * spec.net.pitch,
            cz: (1000.0 + rng.random::<f64>()) * spec.net.pitch,
            distance: spec.distance,
            skew: spec.degradation.skew,
        };
        let raster = Raster::new(&view, &spec.net, &spec.cam)?;
        let cells = OpenCells::count(&raster);
        let (patches, planned) = place_patches(&cells, side, spec.target_coverage, sub_seed(spec.seed, 100 + attempt));
        let err = (planned - spec.target_coverage).abs();
        if best.as_ref().is_none_or(|b| err < (b.3 - spec.target_coverage).abs()) {
            best = Some((view, raster, patches, planned));
        }
        if err <= COVERAGE_TOLERANCE / 2.0 {
            break;
        }
    }
    let (view, raster, patches, planned) = best.expect("at least one attempt");
    if (planned - spec.target_coverage).abs() > COVERAGE_TOLERANCE {
        return Err(Error::Unreachable {
            target: spec.target_coverage,
            reason: format!("closest patch layout covers {planned:.4}"),
        });
    }
    let raw = view::render_raw(
        &raster,
        &view,
        &spec.net,
        &patches,
        None,
        &Palette::default(),
        sub_seed(spec.seed, 3),
    );
    let achieved_coverage = frame_coverage(&raw.clean_mask, &raw.net_mask)?;
    let (w, h) = (spec.cam.image_width, spec.cam.image_height);
    let frame = view::degrade(raw.frame, w, h, &spec.degradation, 0.0, sub_seed(spec.seed, 4));
    Ok(GroundTruth {
        frame,
        net_mask: raw.net_mask,
        clean_mask: raw.clean_mask,
        centers: raster.opening_centers(),
        achieved_coverage,
        distance: spec.distance,
    })
}
