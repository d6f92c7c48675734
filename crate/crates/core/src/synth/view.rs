//! Projection of the planar net into a camera frame.

use crate::error::Result;
use crate::geometry::{projected_grid, CameraModel, GridRaster, NetSpec};
use crate::imaging::{BinaryMask, Image, Rgb};

use super::{Degradation, Palette};

/// Patched mesh cells, in whole-cell units of the net plane.
pub trait PatchLookup {
    fn is_patched(&self, i: i64, j: i64) -> bool;
}

/// What the camera sees: the net point under the frame center, the range to
/// the net, and the shear standing in for a tilted heading.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct View {
    /// along-net coordinate under the frame center (m)
    pub cx: f64,
    /// depth under the frame center (m)
    pub cz: f64,
    pub distance: f64,
    /// horizontal shift per pixel row, as a fraction of the row offset
    pub skew: f64,
}

/// Per-pixel geometry of a view: twine flags and cell indices.
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub grid: GridRaster,
    /// opening-center phase in pixels (before shear)
    pub phase: (f64, f64),
    /// cell index of the grid column / row numbered 0 in pixel space
    pub origin: (i64, i64),
    pub skew: f64,
}

impl Raster {
    pub fn new(view: &View, net: &NetSpec, cam: &CameraModel) -> Result<Self> {
        let grid = projected_grid(view.distance, net, cam)?;
        let s = grid.spacing;
        let m_per_px = view.distance / cam.focal_px();
        let (w, h) = (cam.image_width as f64, cam.image_height as f64);
        // cell i has its opening center at u = (i + 0.5) * pitch
        let axis = |center: f64, half: f64| {
            let first = center - half * m_per_px;
            // continuous cell coordinate of pixel-space 0
            let cell0 = first / net.pitch - 0.5;
            let k = cell0.ceil();
            let phase = (k - cell0) * s;
            (phase, k as i64)
        };
        let (px, ox) = axis(view.cx, w / 2.0);
        let (py, oy) = axis(view.cz, h / 2.0);
        Ok(Self {
            width: cam.image_width,
            height: cam.image_height,
            grid,
            phase: (px, py),
            origin: (ox, oy),
            skew: view.skew,
        })
    }

    fn shear(&self, cy: f64) -> f64 {
        self.skew * (cy - self.height as f64 / 2.0)
    }

    /// Cell index along one axis of the pixel-space coordinate `c`.
    fn cell(&self, c: f64, phase: f64, origin: i64) -> i64 {
        let s = self.grid.spacing;
        ((c - phase + s / 2.0) / s).floor() as i64 + origin
    }

    /// Calls `f(x, y, on_twine, cell)` for every pixel in row-major order.
    pub fn for_each(&self, mut f: impl FnMut(u32, u32, bool, (i64, i64))) {
        for y in 0..self.height {
            let cy = y as f64 + 0.5;
            let row_twine = self.grid.on_twine(cy, self.phase.1);
            let j = self.cell(cy, self.phase.1, self.origin.1);
            let shift = self.shear(cy);
            for x in 0..self.width {
                let cx = x as f64 + 0.5 + shift;
                let twine = row_twine || self.grid.on_twine(cx, self.phase.0);
                let i = self.cell(cx, self.phase.0, self.origin.0);
                f(x, y, twine, (i, j));
            }
        }
    }

    /// Centroids of the openings that lie wholly inside the frame without
    /// touching its border, computed from the grid rather than from a mask.
    pub fn opening_centers(&self) -> Vec<(f64, f64)> {
        let s = self.grid.spacing;
        let t = self.grid.twine_px;
        let (w, h) = (self.width as f64, self.height as f64);
        // pixel index range whose centers fall in [lo, hi)
        let span = |lo: f64, hi: f64| ((lo - 0.5).ceil() as i64, (hi - 0.5).ceil() as i64 - 1);
        let mut out = Vec::new();
        let kmax = (w.max(h) / s).ceil() as i64 + 2;
        // sheared columns can reach this many cells past either edge
        let lean = (self.skew.abs() * h / s).ceil() as i64;
        for r in -2..kmax {
            let cyc = self.phase.1 + r as f64 * s;
            let (y0, y1) = span(cyc - s / 2.0 + t / 2.0, cyc + s / 2.0 - t / 2.0);
            if y0 < 1 || y1 > self.height as i64 - 2 || y1 < y0 {
                continue;
            }
            'cols: for q in -2 - lean..kmax + lean {
                let cxc = self.phase.0 + q as f64 * s;
                let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
                for y in y0..=y1 {
                    let shift = self.shear(y as f64 + 0.5);
                    let (x0, x1) = span(cxc - s / 2.0 + t / 2.0 - shift, cxc + s / 2.0 - t / 2.0 - shift);
                    if x0 < 1 || x1 > self.width as i64 - 2 || x1 < x0 {
                        continue 'cols;
                    }
                    let len = (x1 - x0 + 1) as f64;
                    sx += len * ((x0 + x1) as f64 / 2.0 + 0.5);
                    sy += len * (y as f64 + 0.5);
                    n += len;
                }
                out.push((sx / n, sy / n));
            }
        }
        out
    }
}

/// Deterministic hash to [0, 1).
fn hash01(seed: u64, a: i64, b: i64) -> f64 {
    let mut z = seed ^ (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise over the net plane with features of `scale` meters.
fn value_noise(seed: u64, u: f64, v: f64, scale: f64) -> f64 {
    let (fu, fv) = (u / scale, v / scale);
    let (iu, iv) = (fu.floor(), fv.floor());
    let (tu, tv) = (fu - iu, fv - iv);
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (su, sv) = (smooth(tu), smooth(tv));
    let (iu, iv) = (iu as i64, iv as i64);
    let n00 = hash01(seed, iu, iv);
    let n10 = hash01(seed, iu + 1, iv);
    let n01 = hash01(seed, iu, iv + 1);
    let n11 = hash01(seed, iu + 1, iv + 1);
    let top = n00 + (n10 - n00) * su;
    let bottom = n01 + (n11 - n01) * su;
    top + (bottom - top) * sv
}

fn lerp(a: Rgb, b: Rgb, t: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i] as f64 + (b[i] as f64 - a[i] as f64) * t)
}

pub struct Rendered {
    pub frame: Vec<[f64; 3]>,
    pub net_mask: BinaryMask,
    pub clean_mask: BinaryMask,
}

/// Renders colors and exact masks. `extent` limits the net to
/// `[0, cols) x [0, rows)` cells; outside it only water is visible.
pub fn render_raw(
    raster: &Raster,
    view: &View,
    net: &NetSpec,
    patches: &dyn PatchLookup,
    extent: Option<(i64, i64)>,
    palette: &Palette,
    texture_seed: u64,
) -> Rendered {
    let (w, h) = (raster.width, raster.height);
    let n = w as usize * h as usize;
    let mut frame = Vec::with_capacity(n);
    let mut net_bits = Vec::with_capacity(n);
    let mut clean_bits = Vec::with_capacity(n);
    let m_per_px = raster.grid.spacing.recip() * net.pitch;
    raster.for_each(|x, y, twine, (i, j)| {
        let on_net = extent.is_none_or(|(cols, rows)| (0..cols).contains(&i) && (0..rows).contains(&j));
        let twine = twine && on_net;
        let patched = on_net && patches.is_patched(i, j);
        let water = lerp(palette.water_top, palette.water_bottom, (y as f64 + 0.5) / h as f64);
        let color = if patched {
            let u = view.cx + (x as f64 + 0.5 - w as f64 / 2.0) * m_per_px;
            let v = view.cz + (y as f64 + 0.5 - h as f64 / 2.0) * m_per_px;
            let t = value_noise(texture_seed, u, v, 0.03);
            let t = ((t - 0.5) * 3.0 + 0.5).clamp(0.0, 1.0);
            lerp(palette.patch_dark, palette.patch_light, t)
        } else if twine {
            palette.net.map(|c| c as f64)
        } else {
            water
        };
        frame.push(color);
        net_bits.push(twine || patched);
        clean_bits.push(twine);
    });
    Rendered {
        frame,
        net_mask: BinaryMask::new(w, h, net_bits).expect("dims"),
        clean_mask: BinaryMask::new(w, h, clean_bits).expect("dims"),
    }
}

/// Applies motion smear, blur, illumination falloff and sensor noise.
pub fn degrade(
    frame: Vec<[f64; 3]>,
    width: u32,
    height: u32,
    deg: &Degradation,
    motion_px: f64,
    noise_seed: u64,
) -> Image {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    let to_img = |f: &[[f64; 3]]| {
        Image::new(
            width,
            height,
            f.iter().map(|p| p.map(|v| v.round().clamp(0.0, 255.0) as u8)).collect(),
        )
        .expect("dims")
    };
    let mut img = to_img(&frame);
    if motion_px > 1.0 {
        img = crate::imaging::box_blur_horizontal(&img, motion_px);
    }
    if deg.blur_sigma > 0.0 {
        img = crate::imaging::gaussian_blur(&img, deg.blur_sigma);
    }
    if deg.brightness_gradient == 0.0 && deg.noise_sigma <= 0.0 {
        return img;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = Normal::new(0.0, deg.noise_sigma.max(0.0)).expect("finite sigma");
    let w = width as f64;
    let pixels: Vec<Rgb> = img
        .pixels()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let x = (k % width as usize) as f64 + 0.5;
            let gain = 1.0 + deg.brightness_gradient * (2.0 * x / w - 1.0);
            p.map(|c| {
                let n = if deg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                (c as f64 * gain + n).round().clamp(0.0, 255.0) as u8
            })
        })
        .collect();
    Image::new(width, height, pixels).expect("dims")
}
