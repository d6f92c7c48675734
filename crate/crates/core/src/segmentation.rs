//! Net-versus-background segmentation: a per-pixel logistic-regression
//! classifier on color features, the Dice overlap score, and ingestion of
//! masks produced by external models.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::ColorSpace;
use crate::error::{invalid, Error, Result};
use crate::imaging::{self, srgb_to_lab, BinaryMask, Image, LabeledMask, PixelClass, Rgb};

/// Normalized color features in [0, 1].
pub fn pixel_features(c: Rgb, colorspace: ColorSpace) -> [f64; 3] {
    match colorspace {
        ColorSpace::Rgb => c.map(|v| v as f64 / 255.0),
        ColorSpace::Lab => {
            let l = srgb_to_lab(c);
            [l.l / 100.0, (l.a + 128.0) / 255.0, (l.b + 128.0) / 255.0]
        }
    }
}

/// Training target: cage is net material, sea and fish are background,
/// everything else carries no label.
pub fn class_target(c: PixelClass) -> Option<f64> {
    match c {
        PixelClass::Cage => Some(1.0),
        PixelClass::Sea | PixelClass::Fish => Some(0.0),
        PixelClass::Unlabeled | PixelClass::Blurry => None,
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelClassifier {
    /// bias followed by one weight per color channel
    pub weights: [f64; 4],
    pub colorspace: ColorSpace,
    pub threshold: f64,
}

impl PixelClassifier {
    pub fn new(weights: [f64; 4], colorspace: ColorSpace, threshold: f64) -> Result<Self> {
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(invalid(format!("classifier weights must be finite: {weights:?}")));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(invalid(format!("threshold must be in (0, 1), got {threshold}")));
        }
        Ok(Self {
            weights,
            colorspace,
            threshold,
        })
    }

    pub fn probability(&self, c: Rgb) -> f64 {
        sigmoid(linear(&self.weights, &pixel_features(c, self.colorspace)))
    }

    /// 1 where the net probability reaches the threshold (ties count as net).
    pub fn predict_mask(&self, img: &Image) -> BinaryMask {
        let bits = img.pixels().iter().map(|&c| self.probability(c) >= self.threshold).collect();
        BinaryMask::new(img.width(), img.height(), bits).expect("same dims")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "colorspace={}", self.colorspace).unwrap();
        writeln!(s, "threshold={:?}", self.threshold).unwrap();
        let w: Vec<String> = self.weights.iter().map(|w| format!("{w:?}")).collect();
        writeln!(s, "weights={}", w.join(",")).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (mut cs, mut th, mut w) = (None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("classifier line `{line}` is not key=value")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("classifier `{k}`: {e}")))
            };
            match k.trim() {
                "colorspace" => cs = Some(v.trim().parse::<ColorSpace>()?),
                "threshold" => th = Some(num(v)?),
                "weights" => {
                    let ws = v.split(',').map(num).collect::<Result<Vec<f64>>>()?;
                    let arr: [f64; 4] = ws
                        .try_into()
                        .map_err(|_| Error::Parse("classifier needs exactly 4 weights".into()))?;
                    w = Some(arr);
                }
                other => return Err(Error::Parse(format!("unknown classifier key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("classifier file missing `{k}`"));
        Self::new(
            w.ok_or_else(|| missing("weights"))?,
            cs.ok_or_else(|| missing("colorspace"))?,
            th.ok_or_else(|| missing("threshold"))?,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        imaging::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn linear(w: &[f64; 4], x: &[f64; 3]) -> f64 {
    w[0] + w[1] * x[0] + w[2] * x[1] + w[3] * x[2]
}

/// Labeled pixels as normalized features and 0/1 targets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub features: Vec<[f64; 3]>,
    pub targets: Vec<f64>,
}

impl TrainingSet {
    pub fn from_examples<'a>(
        examples: impl IntoIterator<Item = (&'a Image, &'a LabeledMask)>,
        colorspace: ColorSpace,
    ) -> Result<Self> {
        let mut set = Self::default();
        for (img, mask) in examples {
            if img.dims() != mask.dims() {
                return Err(Error::DimensionMismatch {
                    expected: img.dims(),
                    actual: mask.dims(),
                });
            }
            for (&c, &cls) in img.pixels().iter().zip(mask.classes()) {
                if let Some(t) = class_target(cls) {
                    set.features.push(pixel_features(c, colorspace));
                    set.targets.push(t);
                }
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.targets.iter().filter(|&&t| t > 0.5).count()
    }

    /// Seeded subsample of at most `cap` pixels; the set itself if smaller.
    pub fn subsample(&self, cap: usize, seed: u64) -> Self {
        if self.len() <= cap {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (chosen, _) = idx.partial_shuffle(&mut rng, cap);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        Self {
            features: chosen.iter().map(|&i| self.features[i]).collect(),
            targets: chosen.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Mean log-loss of `w` over the set.
pub fn log_loss(w: &[f64; 4], set: &TrainingSet) -> f64 {
    let n = set.len() as f64;
    set.features
        .iter()
        .zip(&set.targets)
        .map(|(x, &y)| {
            let z = linear(w, x);
            softplus(z) - y * z
        })
        .sum::<f64>()
        / n
}

/// Analytic gradient of [`log_loss`].
pub fn log_loss_gradient(w: &[f64; 4], set: &TrainingSet) -> [f64; 4] {
    let n = set.len() as f64;
    let mut g = [0.0; 4];
    for (x, &y) in set.features.iter().zip(&set.targets) {
        let r = sigmoid(linear(w, x)) - y;
        g[0] += r;
        g[1] += r * x[0];
        g[2] += r * x[1];
        g[3] += r * x[2];
    }
    g.map(|v| v / n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub colorspace: ColorSpace,
    pub epochs: usize,
    pub learning_rate: f64,
    pub threshold: f64,
    pub max_pixels: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            colorspace: ColorSpace::Rgb,
            epochs: 1500,
            // features lie in [0,1]^3, so the loss curvature is at most 1 and
            // a unit step cannot overshoot
            learning_rate: 1.0,
            threshold: 0.5,
            max_pixels: 500_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub classifier: PixelClassifier,
    /// Loss before each update, then after the last one.
    pub losses: Vec<f64>,
    pub pixels: usize,
}

/// Full-batch gradient descent on the mean log-loss, starting from zero
/// weights.
pub fn train_logreg(set: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let pos = set.positives();
    if pos == 0 || pos == set.len() {
        return Err(Error::SingleClass(format!(
            "{} labeled pixels, {pos} of them net",
            set.len()
        )));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(invalid(format!("learning rate must be positive, got {}", cfg.learning_rate)));
    }
    let data = set.subsample(cfg.max_pixels, cfg.seed);
    let mut w = [0.0; 4];
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for _ in 0..cfg.epochs {
        losses.push(log_loss(&w, &data));
        let g = log_loss_gradient(&w, &data);
        for i in 0..4 {
            w[i] -= cfg.learning_rate * g[i];
        }
    }
    losses.push(log_loss(&w, &data));
    Ok(TrainOutcome {
        classifier: PixelClassifier::new(w, cfg.colorspace, cfg.threshold)?,
        losses,
        pixels: data.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_pixels: usize,
    pub test_pixels: usize,
    pub test_accuracy: f64,
    pub test_dice: f64,
    pub epochs: usize,
    pub final_loss: f64,
}

/// Pixel agreement on labeled, non-blurry pixels of one example.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Agreement {
    pub correct: usize,
    pub total: usize,
    /// |pred ∩ truth| over net pixels
    pub overlap: usize,
    pub predicted_net: usize,
    pub true_net: usize,
}

impl Agreement {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            return 1.0;
        }
        self.correct as f64 / self.total as f64
    }

    pub fn dice(&self) -> f64 {
        dice_from_counts(self.overlap, self.predicted_net, self.true_net)
    }

    pub fn merge(self, o: Agreement) -> Agreement {
        Agreement {
            correct: self.correct + o.correct,
            total: self.total + o.total,
            overlap: self.overlap + o.overlap,
            predicted_net: self.predicted_net + o.predicted_net,
            true_net: self.true_net + o.true_net,
        }
    }
}

pub fn agreement(pred: &BinaryMask, truth: &LabeledMask) -> Result<Agreement> {
    if pred.dims() != truth.dims() {
        return Err(Error::DimensionMismatch {
            expected: truth.dims(),
            actual: pred.dims(),
        });
    }
    let mut a = Agreement::default();
    for (&p, &c) in pred.bits().iter().zip(truth.classes()) {
        if let Some(t) = class_target(c) {
            let t = t > 0.5;
            a.total += 1;
            a.correct += (p == t) as usize;
            a.overlap += (p && t) as usize;
            a.predicted_net += p as usize;
            a.true_net += t as usize;
        }
    }
    Ok(a)
}

/// Trains on `train` and scores on `test`.
pub fn train_and_evaluate(
    train: &[(Image, LabeledMask)],
    test: &[(Image, LabeledMask)],
    cfg: &TrainConfig,
) -> Result<(PixelClassifier, TrainReport)> {
    let set = TrainingSet::from_examples(train.iter().map(|(i, m)| (i, m)), cfg.colorspace)?;
    let out = train_logreg(&set, cfg)?;
    let mut score = Agreement::default();
    for (img, mask) in test {
        score = score.merge(agreement(&out.classifier.predict_mask(img), mask)?);
    }
    let report = TrainReport {
        train_pixels: out.pixels,
        test_pixels: score.total,
        test_accuracy: score.accuracy(),
        test_dice: score.dice(),
        epochs: cfg.epochs,
        final_loss: *out.losses.last().expect("loss history"),
    };
    Ok((out.classifier, report))
}

/// Seeded shuffle, then the first `round(n * ratio)` entries (at least one
/// per side) go to training.
pub fn split_dataset<T: Clone>(entries: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let n = entries.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("split needs at least 2 entries, got {n}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = idx[..n_train].iter().map(|&i| entries[i].clone()).collect();
    let test = idx[n_train..].iter().map(|&i| entries[i].clone()).collect();
    Ok((train, test))
}

fn dice_from_counts(overlap: usize, a: usize, b: usize) -> f64 {
    if a + b == 0 {
        return 1.0;
    }
    2.0 * overlap as f64 / (a + b) as f64
}

/// `2|A∩B| / (|A|+|B|)`, defined as 1 when both masks are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (mut overlap, mut na, mut nb) = (0, 0, 0);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        overlap += (x && y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    Ok(dice_from_counts(overlap, na, nb))
}

/// Where a binary mask came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    Classifier,
    External,
}

/// Loads a mask produced outside this crate and checks it against the
/// frame size.
pub fn ingest_external_mask(path: impl AsRef<Path>, expected: (u32, u32)) -> Result<BinaryMask> {
    let mask = imaging::read_mask(path)?;
    if mask.dims() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: mask.dims(),
        });
    }
    Ok(mask)
}
