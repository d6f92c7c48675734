//! A whole patched net filmed along a simulated mission.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fouling::{frame_coverage, FrameInfo, FrameMasks, MaskList};
use crate::geometry::{CameraModel, NetSpec};
use crate::imaging::BinaryMask;
use crate::rov::{MissionPlan, TrajectorySample};
use crate::segmentation::PixelClassifier;

use super::view::{self, PatchLookup, Raster, View};
use super::{check_resolvable, patch_cells, sub_seed, Degradation, GroundTruth, Palette};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionSceneSpec {
    pub net: NetSpec,
    pub cam: CameraModel,
    /// net extent along x (m)
    pub net_width: f64,
    /// net extent in depth (m)
    pub net_height: f64,
    pub patch_size: f64,
    pub target_coverage: f64,
    pub seed: u64,
    pub degradation: Degradation,
    /// shutter time used for motion smear (s)
    pub exposure: f64,
}

impl Default for MissionSceneSpec {
    fn default() -> Self {
        Self {
            net: NetSpec::default(),
            cam: CameraModel::synthetic(),
            net_width: 14.0,
            net_height: 3.0,
            patch_size: 0.25,
            target_coverage: 0.0,
            seed: 0,
            degradation: Degradation::default(),
            exposure: 1.0 / 250.0,
        }
    }
}

impl MissionSceneSpec {
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
        if !(self.net_width > 0.0 && self.net_height > 0.0) || !(self.exposure >= 0.0) {
            return Err(invalid("net extent must be positive and exposure non-negative"));
        }
        patch_cells(self.patch_size, &self.net)?;
        Ok(())
    }

    /// Patch slots across and down the net.
    pub fn slots(&self) -> Result<(usize, usize)> {
        let side = patch_cells(self.patch_size, &self.net)? as f64 * self.net.pitch;
        Ok((
            (self.net_width / side).floor() as usize,
            (self.net_height / side).floor() as usize,
        ))
    }

    /// Half the footprint of a frame on the net at `distance` (m).
    pub fn half_view(&self, distance: f64) -> (f64, f64) {
        let k = distance / self.cam.focal_px();
        (
            self.cam.image_width as f64 / 2.0 * k,
            self.cam.image_height as f64 / 2.0 * k,
        )
    }

    /// Lawnmower over the net between 0.5 m and 2.5 m depth, with the
    /// transect ends pulled in so the frame stays on the net.
    pub fn inspection_plan(&self, standoff: f64) -> MissionPlan {
        let (hw, _) = self.half_view(standoff);
        let margin = hw + 0.3;
        MissionPlan {
            x_min: margin,
            x_max: self.net_width - margin,
            z_min: 0.5_f64.min(self.net_height / 2.0),
            z_max: (self.net_height - 0.5).max(self.net_height / 2.0),
            standoff,
            ..MissionPlan::default()
        }
    }
}

/// Which patch slots are fouled. Every slot row holds the same number of
/// patches give or take one, so any transect sees close to the mission
/// coverage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLayout {
    pub cols: usize,
    pub rows: usize,
    /// row-major
    pub slots: Vec<bool>,
}

impl PatchLayout {
    pub fn stratified(cols: usize, rows: usize, target: f64, seed: u64) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(invalid("patch layout needs at least one slot"));
        }
        if !(0.0..=1.0).contains(&target) {
            return Err(invalid(format!("target coverage must be in [0, 1], got {target}")));
        }
        let n = cols * rows;
        let total = (target * n as f64).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut rng);
        let mut per_row = vec![total / rows; rows];
        for &r in &order[..total % rows] {
            per_row[r] += 1;
        }
        let mut slots = vec![false; n];
        for (r, &count) in per_row.iter().enumerate() {
            for c in index::sample(&mut rng, cols, count) {
                slots[r * cols + c] = true;
            }
        }
        Ok(Self { cols, rows, slots })
    }

    pub fn patched(&self) -> usize {
        self.slots.iter().filter(|&&s| s).count()
    }

    pub fn coverage(&self) -> f64 {
        self.patched() as f64 / self.slots.len() as f64
    }

    pub fn is_slot_patched(&self, col: usize, row: usize) -> bool {
        col < self.cols && row < self.rows && self.slots[row * self.cols + col]
    }
}

struct CellLayout<'a> {
    layout: &'a PatchLayout,
    side: i64,
}

impl PatchLookup for CellLayout<'_> {
    fn is_patched(&self, i: i64, j: i64) -> bool {
        i >= 0
            && j >= 0
            && self
                .layout
                .is_slot_patched((i / self.side) as usize, (j / self.side) as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureView {
    pub id: String,
    pub t: f64,
    pub view: View,
    /// along-net speed during the exposure (m/s)
    pub speed_x: f64,
    pub off_net: bool,
}

/// Renders the frames of a mission on demand.
pub struct MissionRenderer {
    spec: MissionSceneSpec,
    layout: PatchLayout,
    side: i64,
    /// net extent in whole cells
    extent: (i64, i64),
    captures: Vec<CaptureView>,
}

impl MissionRenderer {
    /// One frame per capture event of the trajectory, seen from the true
    /// vehicle position at the true range.
    pub fn new(spec: MissionSceneSpec, trajectory: &[TrajectorySample]) -> Result<Self> {
        spec.validate()?;
        let (cols, rows) = spec.slots()?;
        let layout = PatchLayout::stratified(cols, rows, spec.target_coverage, sub_seed(spec.seed, 10))?;
        let side = patch_cells(spec.patch_size, &spec.net)?;
        let extent = (
            (spec.net_width / spec.net.pitch).round() as i64,
            (spec.net_height / spec.net.pitch).round() as i64,
        );
        let mut captures = Vec::new();
        for s in trajectory.iter().filter(|s| s.capture) {
            let [x, y, z] = s.true_position;
            check_resolvable(y, &spec.net, &spec.cam)?;
            let (hw, hh) = spec.half_view(y);
            let off_net = x - hw < 0.0 || x + hw > spec.net_width || z - hh < 0.0 || z + hh > spec.net_height;
            captures.push(CaptureView {
                id: format!("f{:04}", captures.len()),
                t: s.t,
                view: View {
                    cx: x,
                    cz: z,
                    distance: y,
                    skew: spec.degradation.skew,
                },
                speed_x: s.true_velocity[0],
                off_net,
            });
        }
        Ok(Self {
            spec,
            layout,
            side,
            extent,
            captures,
        })
    }

    pub fn spec(&self) -> &MissionSceneSpec {
        &self.spec
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }

    pub fn captures(&self) -> &[CaptureView] {
        &self.captures
    }

    pub fn frame_infos(&self) -> Vec<FrameInfo> {
        self.captures
            .iter()
            .map(|c| FrameInfo {
                id: c.id.clone(),
                t: c.t,
                off_net: c.off_net,
            })
            .collect()
    }

    fn raw(&self, k: usize) -> Result<(Raster, view::Rendered)> {
        let c = &self.captures[k];
        let raster = Raster::new(&c.view, &self.spec.net, &self.spec.cam)?;
        let lookup = CellLayout {
            layout: &self.layout,
            side: self.side,
        };
        let raw = view::render_raw(
            &raster,
            &c.view,
            &self.spec.net,
            &lookup,
            Some(self.extent),
            &Palette::default(),
            sub_seed(self.spec.seed, 11),
        );
        Ok((raster, raw))
    }

    /// Exact masks of capture `k` without rendering the image.
    pub fn masks(&self, k: usize) -> Result<(BinaryMask, BinaryMask)> {
        let (_, raw) = self.raw(k)?;
        Ok((raw.net_mask, raw.clean_mask))
    }

    pub fn render(&self, k: usize) -> Result<GroundTruth> {
        let (raster, raw) = self.raw(k)?;
        let c = &self.captures[k];
        let achieved_coverage = frame_coverage(&raw.clean_mask, &raw.net_mask)?;
        let motion_px = c.speed_x.abs() * self.spec.exposure * self.spec.cam.focal_px() / c.view.distance;
        let (w, h) = (self.spec.cam.image_width, self.spec.cam.image_height);
        let frame = view::degrade(
            raw.frame,
            w,
            h,
            &self.spec.degradation,
            motion_px,
            sub_seed(self.spec.seed, 1000 + k as u64),
        );
        Ok(GroundTruth {
            frame,
            net_mask: raw.net_mask,
            clean_mask: raw.clean_mask,
            centers: raster.opening_centers(),
            achieved_coverage,
            distance: c.view.distance,
        })
    }
}

/// How mission frames are turned into net masks.
#[derive(Clone, Debug, PartialEq)]
pub enum Segmentation {
    /// exact renderer masks
    GroundTruth,
    Classifier(PixelClassifier),
}

/// Mission frames as an estimator input, rendered and segmented lazily.
pub struct MissionFrames<'a> {
    renderer: &'a MissionRenderer,
    segmentation: Segmentation,
    frames: Vec<FrameInfo>,
}

impl<'a> MissionFrames<'a> {
    pub fn new(renderer: &'a MissionRenderer, segmentation: Segmentation) -> Self {
        Self {
            renderer,
            segmentation,
            frames: renderer.frame_infos(),
        }
    }

    /// Segments every frame once and keeps the masks, for running several
    /// estimator configurations over the same mission.
    pub fn collect(mut self) -> Result<MaskList> {
        let masks = (0..self.frames.len()).map(|i| self.mask(i)).collect::<Result<Vec<_>>>()?;
        Ok(MaskList {
            frames: self.frames,
            masks,
        })
    }
}

impl FrameMasks for MissionFrames<'_> {
    fn frames(&self) -> &[FrameInfo] {
        &self.frames
    }

    fn mask(&mut self, index: usize) -> Result<BinaryMask> {
        match &self.segmentation {
            Segmentation::GroundTruth => Ok(self.renderer.masks(index)?.0),
            Segmentation::Classifier(c) => Ok(c.predict_mask(&self.renderer.render(index)?.frame)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rov::MissionState;

    fn still(n: usize, at: [f64; 3]) -> Vec<TrajectorySample> {
        (0..n)
            .map(|k| TrajectorySample {
                t: k as f64,
                true_position: at,
                true_velocity: [0.0; 3],
                measured_position: at,
                state: MissionState::Transect,
                active_waypoint: 1,
                u_x: 0.0,
                u_z: 0.0,
                capture: true,
            })
            .collect()
    }

    #[test]
    fn stratified_rows_differ_by_at_most_one() {
        for seed in 0..20 {
            let l = PatchLayout::stratified(56, 12, 0.22, seed).unwrap();
            assert_eq!(l.patched(), 148);
            let counts: Vec<usize> = (0..12)
                .map(|r| (0..56).filter(|&c| l.is_slot_patched(c, r)).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{counts:?}");
        }
        assert_eq!(PatchLayout::stratified(56, 12, 0.0, 1).unwrap().patched(), 0);
        assert_eq!(PatchLayout::stratified(56, 12, 1.0, 1).unwrap().patched(), 672);
    }

    #[test]
    fn stationary_trajectory_repeats_frames() {
        let spec = MissionSceneSpec {
            target_coverage: 0.5,
            seed: 4,
            degradation: Degradation {
                noise_sigma: 0.0,
                ..Degradation::default()
            },
            ..MissionSceneSpec::default()
        };
        let r = MissionRenderer::new(spec, &still(3, [5.0, 1.0, 1.2])).unwrap();
        let a = r.render(0).unwrap();
        assert_eq!(a, r.render(1).unwrap());
        assert_eq!(a, r.render(2).unwrap());
        assert!(!r.captures()[0].off_net);
    }

    #[test]
    fn window_past_the_edge_is_off_net() {
        let r = MissionRenderer::new(MissionSceneSpec::default(), &still(1, [0.01, 1.0, 1.0])).unwrap();
        assert!(r.captures()[0].off_net);
        let gt = r.render(0).unwrap();
        // left of the net is bare water
        assert!(!gt.clean_mask.get(0, 100));
        assert!((300..400).any(|x| gt.clean_mask.get(x, 100)));
    }

    #[test]
    fn fully_patched_net_reads_full_coverage() {
        let spec = MissionSceneSpec {
            target_coverage: 1.0,
            ..MissionSceneSpec::default()
        };
        let r = MissionRenderer::new(spec, &still(1, [7.0, 1.0, 1.5])).unwrap();
        assert_eq!(r.render(0).unwrap().achieved_coverage, 1.0);
    }
}
