//! Biofouling quantification: per-frame occlusion of the ideal open mesh,
//! the contour and movement footage filters, and mission-level averaging.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::components;
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    self, detect_mesh_centers, detect_mesh_centers_with_pitch, estimate_distance, fit_phase, median,
    render_ideal_net, CameraModel, NetSpec, MIN_SOLIDITY, PINHOLE_FRACTION,
};
use crate::imaging::BinaryMask;
use crate::rov::TrajectorySample;

/// Share of the ideal open area (ideal = 0) that is material (actual = 1).
pub fn frame_coverage(ideal: &BinaryMask, actual: &BinaryMask) -> Result<f64> {
    ideal.ensure_same_dims(actual)?;
    let (mut open, mut occluded) = (0usize, 0usize);
    for (&i, &a) in ideal.bits().iter().zip(actual.bits()) {
        if !i {
            open += 1;
            occluded += a as usize;
        }
    }
    if open == 0 {
        return Err(invalid("ideal net has no open pixels"));
    }
    Ok(occluded as f64 / open as f64)
}

/// Speckle floor as a fraction of the pitch.
pub const SPECKLE_FRACTION: f64 = 0.1;

/// Cleans a segmentation mask with thresholds scaled to the mesh pitch.
///
/// - material components smaller than `(0.1 p)²` are erased (speckle);
/// - material components smaller than a cell (`p²`) with solidity below 0.2
///   are erased (streaks);
/// - interior openings smaller than `(0.2 p)²` are filled (pinholes).
///
/// Openings cut by the frame edge are left alone: their visible area says
/// nothing about their true size.
pub fn contour_filter(mask: &BinaryMask, pitch_px: f64) -> Result<BinaryMask> {
    if !(pitch_px > 0.0) || !pitch_px.is_finite() {
        return Err(invalid(format!("expected pitch must be positive, got {pitch_px}")));
    }
    let speckle = (SPECKLE_FRACTION * pitch_px).powi(2);
    let pinhole = (PINHOLE_FRACTION * pitch_px).powi(2);
    let cell = pitch_px * pitch_px;
    let mut out = mask.clone();

    let solid = components::label(mask, true);
    let erase: Vec<bool> = solid
        .components
        .iter()
        .map(|c| {
            let a = c.area as f64;
            a < speckle || (a < cell && c.solidity() < MIN_SOLIDITY)
        })
        .collect();
    if erase.iter().any(|&e| e) {
        for (bit, &l) in out.bits_mut().iter_mut().zip(solid.labels()) {
            if l > 0 && erase[l as usize - 1] {
                *bit = false;
            }
        }
    }

    // holes are labeled on the speckle-free mask so erased specks can merge
    // back into the opening around them
    let holes = components::label(&out, false);
    let fill: Vec<bool> = holes
        .components
        .iter()
        .map(|c| !c.touches_border && (c.area as f64) < pinhole)
        .collect();
    if fill.iter().any(|&f| f) {
        let labels = holes.labels().to_vec();
        for (bit, &l) in out.bits_mut().iter_mut().zip(&labels) {
            if l > 0 && fill[l as usize - 1] {
                *bit = true;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovementBand {
    pub min_speed: f64,
    pub max_speed: f64,
    /// largest allowed deviation from the mission median speed
    pub median_tolerance: f64,
    /// half-width of the central difference (s)
    pub baseline: f64,
}

impl Default for MovementBand {
    fn default() -> Self {
        Self {
            min_speed: 0.05,
            max_speed: 0.30,
            median_tolerance: 0.05,
            baseline: 1.0,
        }
    }
}

/// Which position track the movement filter differentiates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackSource {
    /// the vehicle's own navigation solution
    #[default]
    True,
    /// the raw acoustic fixes and depth readings
    Measured,
}

fn position_at(track: &[TrajectorySample], t: f64, source: TrackSource) -> [f64; 3] {
    let i = track.partition_point(|s| s.t < t);
    let pick = if i == 0 {
        0
    } else if i >= track.len() {
        track.len() - 1
    } else if (track[i].t - t).abs() < (t - track[i - 1].t).abs() {
        i
    } else {
        i - 1
    };
    match source {
        TrackSource::True => track[pick].true_position,
        TrackSource::Measured => track[pick].measured_position,
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Speed at each frame time from a central difference over `±baseline`,
/// falling back to a one-sided difference at the ends of the track.
pub fn frame_speeds(
    track: &[TrajectorySample],
    times: &[f64],
    band: &MovementBand,
    source: TrackSource,
) -> Result<Vec<f64>> {
    if track.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "movement filter needs at least 3 trajectory samples, got {}",
            track.len()
        )));
    }
    let (t0, t1) = (track[0].t, track[track.len() - 1].t);
    let h = band.baseline;
    Ok(times
        .iter()
        .map(|&t| {
            let lo = if t - h >= t0 - 1e-9 { t - h } else { t };
            let hi = if t + h <= t1 + 1e-9 { t + h } else { t };
            if hi - lo <= 0.0 {
                return 0.0;
            }
            dist3(position_at(track, hi, source), position_at(track, lo, source)) / (hi - lo)
        })
        .collect())
}

/// Accepts a frame when its speed lies in the band and close to the median
/// speed of all frames.
pub fn movement_filter(speeds: &[f64], band: &MovementBand) -> Vec<bool> {
    if speeds.is_empty() {
        return Vec::new();
    }
    let med = median(&mut speeds.to_vec());
    speeds
        .iter()
        .map(|&s| s >= band.min_speed && s <= band.max_speed && (s - med).abs() <= band.median_tolerance)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "meters")]
pub enum DistanceSource {
    /// pinhole estimate from the detected mesh pitch
    #[default]
    Estimated,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub net: NetSpec,
    pub camera: CameraModel,
    pub contour_filter: bool,
    pub movement_filter: bool,
    pub movement: MovementBand,
    pub track: TrackSource,
    pub distance: DistanceSource,
    /// fewer detected openings than this and the frame borrows the mission pitch
    pub min_centers: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            net: NetSpec::default(),
            camera: CameraModel::synthetic(),
            contour_filter: true,
            movement_filter: true,
            movement: MovementBand::default(),
            track: TrackSource::True,
            distance: DistanceSource::Estimated,
            min_centers: 3,
        }
    }
}

impl EstimateConfig {
    pub fn unfiltered(self) -> Self {
        Self {
            contour_filter: false,
            movement_filter: false,
            ..self
        }
    }
}

/// A captured frame as seen by the estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    pub id: String,
    pub t: f64,
    /// the view left the net; never scored
    pub off_net: bool,
}

/// Lazily produces the segmentation mask of each frame, so a mission never
/// has to hold all masks at once. Masks may be requested more than once.
pub trait FrameMasks {
    fn frames(&self) -> &[FrameInfo];
    fn mask(&mut self, index: usize) -> Result<BinaryMask>;
}

/// In-memory masks, mostly for tests.
pub struct MaskList {
    pub frames: Vec<FrameInfo>,
    pub masks: Vec<BinaryMask>,
}

impl FrameMasks for MaskList {
    fn frames(&self) -> &[FrameInfo] {
        &self.frames
    }

    fn mask(&mut self, index: usize) -> Result<BinaryMask> {
        Ok(self.masks[index].clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    OffNet,
    Movement,
    Unmeasurable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEstimate {
    pub id: String,
    pub t: f64,
    pub fouling_fraction: Option<f64>,
    pub distance_est: Option<f64>,
    pub pitch_px: Option<f64>,
    /// the pitch came from the mission median, not this frame
    pub pitch_fallback: bool,
    pub centers: usize,
    pub speed: Option<f64>,
    pub accepted: bool,
    pub rejection: Option<Rejection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub frames: Vec<FrameEstimate>,
    pub mean_fouling: f64,
    pub total_frames: usize,
    pub accepted_frames: usize,
    pub mission_pitch_px: Option<f64>,
    pub config: EstimateConfig,
}

impl MissionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("mission report: {e}")))
    }

    pub fn frames_csv(&self) -> String {
        let mut s = String::from("id,t,fouling,distance,pitch_px,centers,speed,accepted,rejection\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        for f in &self.frames {
            writeln!(
                s,
                "{},{:.1},{},{},{},{},{},{},{}",
                f.id,
                f.t,
                opt(f.fouling_fraction),
                opt(f.distance_est),
                opt(f.pitch_px),
                f.centers,
                opt(f.speed),
                f.accepted as u8,
                f.rejection.map_or("", |r| match r {
                    Rejection::OffNet => "off-net",
                    Rejection::Movement => "movement",
                    Rejection::Unmeasurable => "unmeasurable",
                })
            )
            .unwrap();
        }
        s
    }

    pub fn summary_table(&self) -> String {
        let c = &self.config;
        let on = |b: bool| if b { "on" } else { "off" };
        let mut s = String::new();
        writeln!(s, "frames          {:>8}", self.total_frames).unwrap();
        writeln!(s, "accepted        {:>8}", self.accepted_frames).unwrap();
        writeln!(s, "mean fouling    {:>7.2}%", 100.0 * self.mean_fouling).unwrap();
        if let Some(p) = self.mission_pitch_px {
            writeln!(s, "mission pitch   {:>8.2} px", p).unwrap();
        }
        writeln!(s, "contour filter  {:>8}", on(c.contour_filter)).unwrap();
        writeln!(s, "movement filter {:>8}", on(c.movement_filter)).unwrap();
        match c.distance {
            DistanceSource::Estimated => writeln!(s, "distance        estimated").unwrap(),
            DistanceSource::Fixed(d) => writeln!(s, "distance        fixed {d} m").unwrap(),
        }
        s
    }
}

/// Sum that does not depend on input order.
fn ordered_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn frame_pitch(centers: &[(f64, f64)], min_centers: usize) -> Option<f64> {
    if centers.len() < min_centers.max(2) {
        return None;
    }
    geometry::estimate_pitch_px(centers).ok()
}

/// Runs the full per-frame pipeline and averages the accepted frames.
///
/// Pass one detects openings on the raw masks to get a mission-wide pitch,
/// which stands in for frames too fouled to measure their own. Pass two
/// filters, measures distance, renders the phase-aligned ideal net and
/// scores each frame.
pub fn estimate_mission(
    source: &mut dyn FrameMasks,
    trajectory: Option<&[TrajectorySample]>,
    cfg: &EstimateConfig,
) -> Result<MissionReport> {
    cfg.net.validate()?;
    cfg.camera.validate()?;
    let frames: Vec<FrameInfo> = source.frames().to_vec();
    let n = frames.len();

    let speeds = match trajectory {
        Some(track) => {
            let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
            Some(frame_speeds(track, &times, &cfg.movement, cfg.track)?)
        }
        None if cfg.movement_filter => {
            return Err(invalid("movement filter needs the mission trajectory"));
        }
        None => None,
    };
    let moving_ok = match (&speeds, cfg.movement_filter) {
        (Some(s), true) => {
            let on_net: Vec<f64> = s.iter().zip(&frames).filter(|(_, f)| !f.off_net).map(|(v, _)| *v).collect();
            let verdict = movement_filter(&on_net, &cfg.movement);
            let mut it = verdict.into_iter();
            frames.iter().map(|f| f.off_net || it.next().unwrap_or(false)).collect()
        }
        _ => vec![true; n],
    };

    // pass one: raw pitch per frame
    let mut raw_pitch = vec![None; n];
    for (i, f) in frames.iter().enumerate() {
        if f.off_net {
            continue;
        }
        let mask = source.mask(i)?;
        raw_pitch[i] = frame_pitch(&detect_mesh_centers(&mask), cfg.min_centers);
    }
    let mut known: Vec<f64> = raw_pitch.iter().flatten().copied().collect();
    let mission_pitch = if known.is_empty() { None } else { Some(median(&mut known)) };

    // pass two
    let mut estimates = Vec::with_capacity(n);
    for (i, f) in frames.iter().enumerate() {
        let mut est = FrameEstimate {
            id: f.id.clone(),
            t: f.t,
            fouling_fraction: None,
            distance_est: None,
            pitch_px: None,
            pitch_fallback: false,
            centers: 0,
            speed: speeds.as_ref().map(|s| s[i]),
            accepted: false,
            rejection: None,
        };
        if f.off_net {
            est.rejection = Some(Rejection::OffNet);
            estimates.push(est);
            continue;
        }
        let mut mask = source.mask(i)?;
        let scale = raw_pitch[i].or(mission_pitch);
        if cfg.contour_filter {
            if let Some(p) = scale {
                mask = contour_filter(&mask, p)?;
            }
        }
        let centers = match scale {
            Some(p) => detect_mesh_centers_with_pitch(&mask, p),
            None => detect_mesh_centers(&mask),
        };
        est.centers = centers.len();
        let pitch = match frame_pitch(&centers, cfg.min_centers) {
            Some(p) => Some(p),
            None => {
                est.pitch_fallback = true;
                mission_pitch
            }
        };
        est.pitch_px = pitch;
        let distance = match (cfg.distance, pitch) {
            (DistanceSource::Fixed(d), _) => Some(d),
            (DistanceSource::Estimated, Some(p)) => Some(estimate_distance(p, &cfg.net, &cfg.camera)?),
            (DistanceSource::Estimated, None) => None,
        };
        est.distance_est = distance;
        let fouling = distance.and_then(|d| {
            let grid_pitch = cfg.camera.focal_px() * cfg.net.pitch / d;
            let phase = if centers.is_empty() {
                (0.0, 0.0)
            } else {
                fit_phase(&centers, grid_pitch).unwrap_or((0.0, 0.0))
            };
            let ideal = render_ideal_net(d, &cfg.net, &cfg.camera, phase).ok()?;
            frame_coverage(&ideal, &mask).ok()
        });
        est.fouling_fraction = fouling;
        if fouling.is_none() {
            est.rejection = Some(Rejection::Unmeasurable);
        } else if !moving_ok[i] {
            est.rejection = Some(Rejection::Movement);
        } else {
            est.accepted = true;
        }
        estimates.push(est);
    }

    let accepted: Vec<f64> = estimates
        .iter()
        .filter(|e| e.accepted)
        .filter_map(|e| e.fouling_fraction)
        .collect();
    if accepted.is_empty() {
        return Err(Error::NoAcceptedFrames { total: n });
    }
    Ok(MissionReport {
        mean_fouling: ordered_mean(&accepted),
        total_frames: n,
        accepted_frames: accepted.len(),
        frames: estimates,
        mission_pitch_px: mission_pitch,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{render_grid, GridRaster};
    use crate::rov::MissionState;

    fn grid(w: u32, h: u32) -> BinaryMask {
        let g = GridRaster {
            spacing: 25.0,
            twine_px: 2.0,
        };
        render_grid(&g, w, h, (5.0, 9.0))
    }

    #[test]
    fn coverage_basics() {
        let ideal = grid(100, 80);
        assert_eq!(frame_coverage(&ideal, &ideal).unwrap(), 0.0);
        let full = BinaryMask::filled(100, 80, true).unwrap();
        assert_eq!(frame_coverage(&ideal, &full).unwrap(), 1.0);
        assert!(frame_coverage(&full, &full).is_err());
        assert!(frame_coverage(&ideal, &BinaryMask::filled(10, 10, true).unwrap()).is_err());
    }

    #[test]
    fn coverage_counts_pixels() {
        // 10x10 all open ideal, 22 occluded
        let ideal = BinaryMask::filled(10, 10, false).unwrap();
        let actual = BinaryMask::from_fn(10, 10, |x, y| y * 10 + x < 22).unwrap();
        assert_eq!(frame_coverage(&ideal, &actual).unwrap(), 0.22);
    }

    #[test]
    fn speckle_is_removed_and_clean_grid_kept() {
        let clean = grid(120, 90);
        assert_eq!(contour_filter(&clean, 25.0).unwrap(), clean);
        let mut speck = clean.clone();
        speck.set(12, 20, true);
        speck.set(13, 20, true);
        assert_eq!(contour_filter(&speck, 25.0).unwrap(), clean);
        // (16, 20) sits where a vertical and a horizontal twine line cross,
        // so clearing it leaves a 1-px pinhole enclosed by material
        let mut hole = clean.clone();
        assert!(clean.get(16, 20));
        hole.set(16, 20, false);
        assert_eq!(contour_filter(&hole, 25.0).unwrap(), clean);
        assert!(contour_filter(&clean, 0.0).is_err());
    }

    #[test]
    fn thin_streak_inside_an_opening_is_removed() {
        let clean = grid(120, 90);
        let mut m = clean.clone();
        // 1-px wide L with 20-px arms inside the opening spanning x 43..=65, y 47..=69;
        // solidity about 39/210
        for k in 0..20 {
            m.set(44, 48 + k, true);
            m.set(44 + k, 67, true);
        }
        let l = &components::label(&m, true).components;
        assert!(l.iter().any(|c| c.area == 39 && c.solidity() < MIN_SOLIDITY));
        assert_eq!(contour_filter(&m, 25.0).unwrap(), clean);
    }

    fn track(speeds: &[(f64, f64)]) -> Vec<TrajectorySample> {
        // (duration, speed) segments sampled at 10 Hz along x
        let mut out = Vec::new();
        let (mut t, mut x) = (0.0, 0.0);
        for &(dur, v) in speeds {
            let steps = (dur * 10.0).round() as usize;
            for _ in 0..steps {
                out.push(TrajectorySample {
                    t,
                    true_position: [x, 1.0, 1.0],
                    true_velocity: [v, 0.0, 0.0],
                    measured_position: [x, 1.0, 1.0],
                    state: MissionState::Transect,
                    active_waypoint: 1,
                    u_x: 0.0,
                    u_z: 0.0,
                    capture: false,
                });
                t = ((t * 10.0).round() + 1.0) / 10.0;
                x += v * 0.1;
            }
        }
        out
    }

    #[test]
    fn constant_speed_accepts_all() {
        let tr = track(&[(30.0, 0.15)]);
        let times: Vec<f64> = (0..30).map(|t| t as f64).collect();
        let s = frame_speeds(&tr, &times, &MovementBand::default(), TrackSource::True).unwrap();
        assert!(s.iter().all(|v| (v - 0.15).abs() < 1e-9));
        assert!(movement_filter(&s, &MovementBand::default()).iter().all(|&a| a));
    }

    #[test]
    fn hover_and_dash_are_rejected() {
        // 20 s cruise, 10 s hover, 20 s cruise, 3 s dash at 0.5, 20 s cruise
        let tr = track(&[(20.0, 0.15), (10.0, 0.0), (20.0, 0.15), (3.0, 0.5), (20.0, 0.15)]);
        let times: Vec<f64> = (0..73).map(|t| t as f64).collect();
        let band = MovementBand::default();
        let s = frame_speeds(&tr, &times, &band, TrackSource::True).unwrap();
        let ok = movement_filter(&s, &band);
        // oracle: central difference over +-1 s of the piecewise-linear track
        let pos = |t: f64| -> f64 {
            let seg = [(20.0, 0.15), (10.0, 0.0), (20.0, 0.15), (3.0, 0.5), (20.0, 0.15)];
            let (mut x, mut t0) = (0.0, 0.0);
            for (d, v) in seg {
                let dt = (t - t0).clamp(0.0, d);
                x += v * dt;
                t0 += d;
            }
            x
        };
        let mut rejected = Vec::new();
        for (i, &t) in times.iter().enumerate() {
            let (lo, hi) = ((t - 1.0).max(0.0), (t + 1.0).min(72.9));
            let v = (pos(hi) - pos(lo)) / (hi - lo);
            let want = (0.05..=0.30).contains(&v) && (v - 0.15).abs() <= 0.05;
            assert_eq!(ok[i], want, "t={t} v={v} got {}", s[i]);
            if !want {
                rejected.push(t as u32);
            }
        }
        // hover covers 20..30 (speed 0 from 21 to 29), dash 50..53
        assert!(rejected.contains(&25) && rejected.contains(&51));
        assert!(!rejected.contains(&10) && !rejected.contains(&40));
        assert!(frame_speeds(&tr[..2], &times, &band, TrackSource::True).is_err());
    }

    #[test]
    fn no_accepted_frames_is_an_error() {
        let ideal = grid(100, 80);
        let mut src = MaskList {
            frames: vec![FrameInfo {
                id: "a".into(),
                t: 0.0,
                off_net: true,
            }],
            masks: vec![ideal],
        };
        let cfg = EstimateConfig::default().unfiltered();
        assert!(matches!(
            estimate_mission(&mut src, None, &cfg),
            Err(Error::NoAcceptedFrames { total: 1 })
        ));
    }

    #[test]
    fn clean_masks_score_zero_and_mean_is_order_free() {
        let cam = CameraModel::new(4.0, 0.4, 0.32, 100, 80).unwrap();
        let cfg = EstimateConfig {
            camera: cam,
            ..EstimateConfig::default().unfiltered()
        };
        let mk = |phase: (f64, f64), fouled: u32| {
            let mut m = render_ideal_net(1.0, &NetSpec::default(), &cam, phase).unwrap();
            for y in 0..fouled {
                for x in 0..100 {
                    m.set(x, y, true);
                }
            }
            m
        };
        let masks = vec![mk((3.0, 4.0), 0), mk((10.0, 2.0), 20), mk((7.0, 7.0), 40)];
        let frames: Vec<FrameInfo> = (0..3)
            .map(|i| FrameInfo {
                id: format!("f{i}"),
                t: i as f64,
                off_net: false,
            })
            .collect();
        let mut src = MaskList {
            frames: frames.clone(),
            masks: masks.clone(),
        };
        let r = estimate_mission(&mut src, None, &cfg).unwrap();
        assert_eq!(r.frames[0].fouling_fraction, Some(0.0));
        assert!((r.frames[0].distance_est.unwrap() - 1.0).abs() < 0.02);
        let mut rev = MaskList {
            frames: frames.into_iter().rev().collect(),
            masks: masks.into_iter().rev().collect(),
        };
        let r2 = estimate_mission(&mut rev, None, &cfg).unwrap();
        assert_eq!(r.mean_fouling.to_bits(), r2.mean_fouling.to_bits());
        let json = r.to_json();
        assert_eq!(MissionReport::from_json(&json).unwrap(), r);
    }
}
