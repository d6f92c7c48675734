//! Net mesh geometry: opening detection, pitch and pinhole distance
//! estimation, and rendering of the ideal (clean) net.
//!
//! Openings are the 0-regions of a segmentation mask. Their centers stay put
//! while fouling shrinks them, which makes them stable features for both the
//! pixel pitch and the grid phase.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::components;
use crate::error::{invalid, Error, Result};
use crate::imaging::BinaryMask;

/// Pinhole camera intrinsics. Pixels are assumed square, so the focal length
/// in pixels is taken from the horizontal axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// mm
    pub focal_length: f64,
    /// mm
    pub sensor_width: f64,
    /// mm
    pub sensor_height: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl CameraModel {
    pub fn new(
        focal_length: f64,
        sensor_width: f64,
        sensor_height: f64,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self> {
        let cam = Self {
            focal_length,
            sensor_width,
            sensor_height,
            image_width,
            image_height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.focal_length > 0.0
            && self.sensor_width > 0.0
            && self.sensor_height > 0.0
            && self.image_width > 0
            && self.image_height > 0
            && self.focal_px().is_finite();
        if !ok {
            return Err(invalid(format!("camera model has non-positive fields: {self:?}")));
        }
        Ok(())
    }

    /// Full-HD ROV camera with a roughly 80 degree horizontal field of view.
    pub fn rov_full_hd() -> Self {
        Self {
            focal_length: 3.34,
            sensor_width: 5.6,
            sensor_height: 3.15,
            image_width: 1920,
            image_height: 1080,
        }
    }

    /// Intrinsics of the synthetic renderer: a 480x270 working crop with a
    /// focal length of 3000 px.
    pub fn synthetic() -> Self {
        Self {
            focal_length: 6.0,
            sensor_width: 0.96,
            sensor_height: 0.54,
            image_width: 480,
            image_height: 270,
        }
    }

    pub fn focal_px(&self) -> f64 {
        self.focal_length * self.image_width as f64 / self.sensor_width
    }

    /// Camera with the focal length rescaled so that `focal_px()` equals `f`.
    pub fn with_focal_px(mut self, f: f64) -> Self {
        self.focal_length = f * self.sensor_width / self.image_width as f64;
        self
    }
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::rov_full_hd()
    }
}

/// Physical mesh geometry in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    /// center-to-center opening spacing
    pub pitch: f64,
    /// thread thickness
    pub twine: f64,
}

impl NetSpec {
    pub fn new(pitch: f64, twine: f64) -> Result<Self> {
        let net = Self { pitch, twine };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.twine > 0.0 && self.twine < self.pitch) {
            return Err(invalid(format!(
                "net needs 0 < twine < pitch, got twine {} pitch {}",
                self.twine, self.pitch
            )));
        }
        Ok(())
    }
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            pitch: 0.025,
            twine: 0.002,
        }
    }
}

/// Rasterization rule for an axis-aligned square grid, shared by the ideal
/// net renderer and the synthetic scene so both agree pixel for pixel.
///
/// Opening centers sit at `phase + k * spacing`; twine lines are centered
/// halfway between them and cover the half-open interval of width `twine_px`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRaster {
    pub spacing: f64,
    pub twine_px: f64,
}

impl GridRaster {
    /// Whether the pixel whose center is at coordinate `c` lies on a twine
    /// line along one axis.
    #[inline]
    pub fn on_twine(&self, c: f64, phase: f64) -> bool {
        let v = (c - phase - self.spacing / 2.0 + self.twine_px / 2.0).rem_euclid(self.spacing);
        v < self.twine_px
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDetection {
    pub centers: Vec<(f64, f64)>,
    pub pitch_px: Option<f64>,
    pub phase: Option<(f64, f64)>,
}

impl MeshDetection {
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self::from_centers(detect_mesh_centers(mask))
    }

    pub fn from_centers(centers: Vec<(f64, f64)>) -> Self {
        let pitch_px = estimate_pitch_px(&centers).ok();
        let phase = pitch_px.and_then(|p| fit_phase(&centers, p).ok());
        Self {
            centers,
            pitch_px,
            phase,
        }
    }
}

/// Fraction of the pitch below which an opening counts as a pinhole.
pub const PINHOLE_FRACTION: f64 = 0.2;
/// Solidity below which a sub-cell component counts as a streak artifact.
pub const MIN_SOLIDITY: f64 = 0.2;

/// Centroids of the interior mesh openings of `mask`.
///
/// Openings are 4-connected 0-regions that do not touch the image border.
/// Pinholes and streaks are dropped with the contour-filter thresholds, using
/// the square root of the median opening area as the pitch scale.
pub fn detect_mesh_centers(mask: &BinaryMask) -> Vec<(f64, f64)> {
    detect_openings(mask, None)
}

/// As [`detect_mesh_centers`], with the pitch scale supplied by the caller.
pub fn detect_mesh_centers_with_pitch(mask: &BinaryMask, pitch_px: f64) -> Vec<(f64, f64)> {
    detect_openings(mask, Some(pitch_px))
}

fn detect_openings(mask: &BinaryMask, pitch_px: Option<f64>) -> Vec<(f64, f64)> {
    let labeling = components::label(mask, false);
    let interior: Vec<_> = labeling
        .components
        .iter()
        .filter(|c| !c.touches_border)
        .collect();
    if interior.is_empty() {
        return Vec::new();
    }
    let scale = pitch_px.unwrap_or_else(|| {
        let mut areas: Vec<f64> = interior.iter().map(|c| c.area as f64).collect();
        median(&mut areas).sqrt()
    });
    let min_area = (PINHOLE_FRACTION * scale).powi(2);
    interior
        .into_iter()
        .filter(|c| c.area as f64 >= min_area)
        .filter(|c| c.area as f64 >= scale * scale || c.solidity() >= MIN_SOLIDITY)
        .map(|c| c.centroid())
        .collect()
}

/// Median nearest-neighbour distance between centers.
pub fn estimate_pitch_px(centers: &[(f64, f64)]) -> Result<f64> {
    if centers.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "pitch needs at least 2 centers, got {}",
            centers.len()
        )));
    }
    let mut nn: Vec<f64> = centers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            centers
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| (a.0 - b.0).hypot(a.1 - b.1))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(median(&mut nn))
}

/// Similar-triangles pinhole relation: `focal_px * pitch / pitch_px`.
pub fn estimate_distance(pitch_px: f64, net: &NetSpec, cam: &CameraModel) -> Result<f64> {
    if !(pitch_px > 0.0) || !pitch_px.is_finite() {
        return Err(invalid(format!("pitch in pixels must be positive, got {pitch_px}")));
    }
    Ok(cam.focal_px() * net.pitch / pitch_px)
}

/// Grid spacing and twine width in pixels for a net seen at `distance`.
pub fn projected_grid(distance: f64, net: &NetSpec, cam: &CameraModel) -> Result<GridRaster> {
    if !(distance > 0.0) {
        return Err(invalid(format!("distance must be positive, got {distance}")));
    }
    let f = cam.focal_px();
    let spacing = f * net.pitch / distance;
    if spacing < 2.0 {
        return Err(Error::Unresolvable { pitch_px: spacing });
    }
    let twine_px = (f * net.twine / distance).round().max(1.0);
    Ok(GridRaster { spacing, twine_px })
}

/// Clean-net mask at `distance`: axis-aligned twine lines (1) around square
/// openings (0) whose centers are offset by `phase`.
pub fn render_ideal_net(
    distance: f64,
    net: &NetSpec,
    cam: &CameraModel,
    phase: (f64, f64),
) -> Result<BinaryMask> {
    let grid = projected_grid(distance, net, cam)?;
    Ok(render_grid(&grid, cam.image_width, cam.image_height, phase))
}

pub fn render_grid(grid: &GridRaster, width: u32, height: u32, phase: (f64, f64)) -> BinaryMask {
    let cols: Vec<bool> = (0..width)
        .map(|x| grid.on_twine(x as f64 + 0.5, phase.0))
        .collect();
    let mut bits = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        if grid.on_twine(y as f64 + 0.5, phase.1) {
            bits.extend(std::iter::repeat_n(true, width as usize));
        } else {
            bits.extend_from_slice(&cols);
        }
    }
    BinaryMask::new(width, height, bits).expect("grid dims")
}

/// Grid offset per axis: circular mean of center coordinates modulo the pitch.
pub fn fit_phase(centers: &[(f64, f64)], pitch_px: f64) -> Result<(f64, f64)> {
    if centers.is_empty() {
        return Err(Error::InsufficientData("phase needs at least 1 center".into()));
    }
    if !(pitch_px > 0.0) {
        return Err(invalid(format!("pitch in pixels must be positive, got {pitch_px}")));
    }
    let axis = |coord: &dyn Fn(&(f64, f64)) -> f64| {
        let (mut s, mut c) = (0.0, 0.0);
        for p in centers {
            let a = TAU * coord(p) / pitch_px;
            s += a.sin();
            c += a.cos();
        }
        (s.atan2(c) / TAU * pitch_px).rem_euclid(pitch_px)
    };
    Ok((axis(&|p| p.0), axis(&|p| p.1)))
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
