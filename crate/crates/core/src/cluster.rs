//! K-means color clustering for the labeling workflow.
//!
//! An operator clusters a frame, toggles clusters on and off, and assigns
//! each cluster a class; [`legend_to_mask`] turns that legend into a
//! [`LabeledMask`].

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::imaging::{lab_to_rgb, srgb_to_lab, Image, Lab, LabeledMask, PixelClass, Rgb};

pub const MAX_K: usize = 64;
pub const DEFAULT_K: usize = 8;
pub const MAX_ITERATIONS: usize = 100;
/// Largest centroid move, in color units, that still counts as converged.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    #[default]
    Rgb,
    Lab,
}

impl ColorSpace {
    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Rgb => "rgb",
            ColorSpace::Lab => "lab",
        }
    }

    /// Raw feature vector: RGB in 0..=255 or CIELAB.
    pub fn features(self, c: Rgb) -> [f64; 3] {
        match self {
            ColorSpace::Rgb => [c[0] as f64, c[1] as f64, c[2] as f64],
            ColorSpace::Lab => {
                let l = srgb_to_lab(c);
                [l.l, l.a, l.b]
            }
        }
    }

    pub fn to_rgb(self, f: [f64; 3]) -> Rgb {
        match self {
            ColorSpace::Rgb => f.map(|v| v.round().clamp(0.0, 255.0) as u8),
            ColorSpace::Lab => lab_to_rgb(Lab {
                l: f[0],
                a: f[1],
                b: f[2],
            }),
        }
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(ColorSpace::Rgb),
            "lab" => Ok(ColorSpace::Lab),
            _ => Err(invalid(format!("unknown colorspace `{s}` (expected rgb or lab)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub colorspace: ColorSpace,
    pub width: u32,
    pub height: u32,
    pub centroids: Vec<[f64; 3]>,
    pub assignment: Vec<u32>,
    /// Sum of squared residuals after every assignment step; the last value
    /// belongs to the final centroids and assignment.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().expect("at least one assignment step")
    }

    pub fn pixel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &a in &self.assignment {
            counts[a as usize] += 1;
        }
        counts
    }

    pub fn centroid_rgb(&self, i: usize) -> Rgb {
        self.colorspace.to_rgb(self.centroids[i])
    }

    /// Per-pixel centroid in feature space, without rounding.
    pub fn quantized_features(&self) -> Vec<[f64; 3]> {
        self.assignment.iter().map(|&a| self.centroids[a as usize]).collect()
    }

    fn check_dims(&self, img: &Image) -> Result<()> {
        if img.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                actual: img.dims(),
            });
        }
        Ok(())
    }
}

/// Clusters the pixel colors of `img` with k-means++ seeding and Lloyd
/// iterations. Deterministic for a fixed `(img, k, colorspace, seed)`.
pub fn kmeans(img: &Image, k: usize, colorspace: ColorSpace, seed: u64) -> Result<ClusterModel> {
    if !(1..=MAX_K).contains(&k) {
        return Err(invalid(format!("k must be in 1..={MAX_K}, got {k}")));
    }
    let points: Vec<[f64; 3]> = img.pixels().iter().map(|&c| colorspace.features(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(&points, k, &mut rng);
    let mut assignment = vec![0u32; points.len()];
    let mut dist = vec![0f64; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        history.push(assign(&points, &centroids, &mut assignment, &mut dist));
        if iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;
        let moved = update(&points, &mut centroids, &assignment, &dist);
        if moved < TOLERANCE {
            history.push(assign(&points, &centroids, &mut assignment, &mut dist));
            break;
        }
    }

    Ok(ClusterModel {
        k,
        colorspace,
        width: img.width(),
        height: img.height(),
        centroids,
        assignment,
        objective_history: history,
        iterations,
    })
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

fn seed_plus_plus(points: &[[f64; 3]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > r && d > 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Nearest-centroid assignment (ties go to the lowest index); returns the
/// objective.
fn assign(points: &[[f64; 3]], centroids: &[[f64; 3]], assignment: &mut [u32], dist: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for ((p, a), d) in points.iter().zip(assignment.iter_mut()).zip(dist.iter_mut()) {
        let mut best = (f64::INFINITY, 0u32);
        for (j, c) in centroids.iter().enumerate() {
            let v = sq_dist(p, c);
            if v < best.0 {
                best = (v, j as u32);
            }
        }
        *a = best.1;
        *d = best.0;
        total += best.0;
    }
    total
}

/// Moves every centroid to the mean of its members. Empty clusters jump to
/// the point farthest from its own centroid. Returns the largest move.
fn update(points: &[[f64; 3]], centroids: &mut [[f64; 3]], assignment: &[u32], dist: &[f64]) -> f64 {
    let k = centroids.len();
    let mut sums = vec![[0f64; 3]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        let s = &mut sums[a as usize];
        s[0] += p[0];
        s[1] += p[1];
        s[2] += p[2];
        counts[a as usize] += 1;
    }
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    let mut moved = 0f64;
    for j in 0..k {
        let next = if counts[j] > 0 {
            let n = counts[j] as f64;
            [sums[j][0] / n, sums[j][1] / n, sums[j][2] / n]
        } else {
            let far = dist
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken.contains(i))
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i);
            match far {
                Some(i) if dist[i] > 0.0 => {
                    taken.insert(i);
                    points[i]
                }
                _ => centroids[j],
            }
        };
        moved = moved.max(sq_dist(&next, &centroids[j]).sqrt());
        centroids[j] = next;
    }
    moved
}

/// Replaces every pixel by the color of its cluster centroid.
pub fn quantize(img: &Image, model: &ClusterModel) -> Result<Image> {
    model.check_dims(img)?;
    let colors: Vec<Rgb> = (0..model.k).map(|i| model.centroid_rgb(i)).collect();
    let pixels = model.assignment.iter().map(|&a| colors[a as usize]).collect();
    Image::new(model.width, model.height, pixels)
}

/// Original pixels for enabled clusters, black for the rest.
pub fn overlay(img: &Image, model: &ClusterModel, enabled: &[bool]) -> Result<Image> {
    model.check_dims(img)?;
    if enabled.len() != model.k {
        return Err(invalid(format!(
            "enabled flags for {} clusters, model has {}",
            enabled.len(),
            model.k
        )));
    }
    let pixels = img
        .pixels()
        .iter()
        .zip(&model.assignment)
        .map(|(&c, &a)| if enabled[a as usize] { c } else { [0, 0, 0] })
        .collect();
    Image::new(model.width, model.height, pixels)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub index: usize,
    pub centroid_rgb: Rgb,
    pub pixel_count: usize,
    pub enabled: bool,
    pub class: Option<PixelClass>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLegend {
    pub entries: Vec<LegendEntry>,
}

impl ClusterLegend {
    /// Every cluster enabled, none assigned.
    pub fn from_model(model: &ClusterModel) -> Self {
        let counts = model.pixel_counts();
        let entries = (0..model.k)
            .map(|i| LegendEntry {
                index: i,
                centroid_rgb: model.centroid_rgb(i),
                pixel_count: counts[i],
                enabled: true,
                class: None,
            })
            .collect();
        Self { entries }
    }

    pub fn assign(&mut self, index: usize, class: Option<PixelClass>) -> Result<()> {
        let n = self.entries.len();
        let e = self
            .entries
            .get_mut(index)
            .ok_or_else(|| invalid(format!("cluster {index} out of range (k={n})")))?;
        e.class = class.filter(|&c| c != PixelClass::Unlabeled);
        Ok(())
    }

    pub fn set_enabled(&mut self, enabled: &[usize]) -> Result<()> {
        if let Some(&bad) = enabled.iter().find(|&&i| i >= self.entries.len()) {
            return Err(invalid(format!(
                "cluster {bad} out of range (k={})",
                self.entries.len()
            )));
        }
        for e in &mut self.entries {
            e.enabled = enabled.contains(&e.index);
        }
        Ok(())
    }

    pub fn enabled_flags(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.enabled).collect()
    }

    pub fn has_assignments(&self) -> bool {
        self.entries.iter().any(|e| e.enabled && e.class.is_some())
    }
}

/// Pixel class from the legend entry of its cluster; disabled or unassigned
/// clusters map to [`PixelClass::Unlabeled`].
pub fn legend_to_mask(model: &ClusterModel, legend: &ClusterLegend) -> Result<LabeledMask> {
    if legend.entries.len() != model.k {
        return Err(invalid(format!(
            "legend has {} entries, model has {} clusters",
            legend.entries.len(),
            model.k
        )));
    }
    let table: Vec<PixelClass> = legend
        .entries
        .iter()
        .map(|e| match (e.enabled, e.class) {
            (true, Some(c)) => c,
            _ => PixelClass::Unlabeled,
        })
        .collect();
    let classes = model.assignment.iter().map(|&a| table[a as usize]).collect();
    LabeledMask::new(model.width, model.height, classes)
}
