use serde::{Deserialize, Serialize};

use super::{Image, Rgb};
use crate::error::{invalid, Result};

/// Axis-aligned crop window in source-pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl CropRect {
    pub fn full(width: u32, height: u32) -> Self {
        Self {
            x: 0,
            y: 0,
            width,
            height,
        }
    }

    /// Centered window keeping `fraction` of each axis. Odd leftovers round
    /// the top-left corner down.
    pub fn centered(width: u32, height: u32, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(invalid(format!("crop fraction must be in (0, 1], got {fraction}")));
        }
        let cw = scaled(width, fraction);
        let ch = scaled(height, fraction);
        if cw == 0 || ch == 0 {
            return Err(invalid(format!(
                "crop of {width}x{height} at {fraction} is empty"
            )));
        }
        Ok(Self {
            x: (width - cw) / 2,
            y: (height - ch) / 2,
            width: cw,
            height: ch,
        })
    }
}

impl std::fmt::Display for CropRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.width, self.height)
    }
}

impl std::str::FromStr for CropRect {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| crate::Error::Parse(format!("crop `{s}`: {e}")))?;
        match parts[..] {
            [x, y, width, height] => Ok(Self {
                x,
                y,
                width,
                height,
            }),
            _ => Err(crate::Error::Parse(format!("crop `{s}` needs x,y,w,h"))),
        }
    }
}

fn scaled(dim: u32, fraction: f64) -> u32 {
    // the epsilon keeps 0.3 * 10 from flooring to 2 on representations like 2.9999999999999996
    ((dim as f64 * fraction) + 1e-9).floor() as u32
}

pub fn crop(img: &Image, rect: CropRect) -> Result<Image> {
    if rect.width == 0
        || rect.height == 0
        || rect.x + rect.width > img.width()
        || rect.y + rect.height > img.height()
    {
        return Err(invalid(format!(
            "crop {rect} exceeds {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let mut pixels = Vec::with_capacity(rect.width as usize * rect.height as usize);
    let w = img.width() as usize;
    for y in rect.y..rect.y + rect.height {
        let row = y as usize * w;
        pixels.extend_from_slice(
            &img.pixels()[row + rect.x as usize..row + (rect.x + rect.width) as usize],
        );
    }
    Image::new(rect.width, rect.height, pixels)
}

pub fn center_crop(img: &Image, fraction: f64) -> Result<Image> {
    let rect = CropRect::centered(img.width(), img.height(), fraction)?;
    crop(img, rect)
}

/// 3x3 sharpening (center 5, 4-neighbours -1) with replicated borders.
pub fn sharpen(img: &Image) -> Image {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let at = |x: i64, y: i64| img.get(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32);
    let mut out = Vec::with_capacity(img.pixels().len());
    for y in 0..h {
        for x in 0..w {
            let c = at(x, y);
            let n = [at(x - 1, y), at(x + 1, y), at(x, y - 1), at(x, y + 1)];
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let v = 5 * c[ch] as i32 - n.iter().map(|p| p[ch] as i32).sum::<i32>();
                px[ch] = v.clamp(0, 255) as u8;
            }
            out.push(px);
        }
    }
    Image::new(img.width(), img.height(), out).expect("same dims")
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with replicated borders; `sigma <= 0` is identity.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    separable(img, &k, &k)
}

/// Horizontal box blur of `length` pixels (fractional ends weighted), used
/// to model motion smear along the transect.
pub fn box_blur_horizontal(img: &Image, length: f64) -> Image {
    if length <= 1.0 {
        return img.clone();
    }
    let half = length / 2.0;
    let radius = half.ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| {
            // overlap of pixel [i-0.5, i+0.5] with [-half, half]
            let lo = (i as f64 - 0.5).max(-half);
            let hi = (i as f64 + 0.5).min(half);
            (hi - lo).max(0.0)
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    separable(img, &k, &[1.0])
}

fn separable(img: &Image, kx: &[f64], ky: &[f64]) -> Image {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rx = (kx.len() / 2) as i64;
    let ry = (ky.len() / 2) as i64;
    let src = img.pixels();
    let mut tmp = vec![[0f64; 3]; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = [0f64; 3];
            for (j, &kv) in kx.iter().enumerate() {
                let sx = (x as i64 + j as i64 - rx).clamp(0, w as i64 - 1) as usize;
                let p = row[sx];
                acc[0] += kv * p[0] as f64;
                acc[1] += kv * p[1] as f64;
                acc[2] += kv * p[2] as f64;
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out: Vec<Rgb> = vec![[0; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f64; 3];
            for (j, &kv) in ky.iter().enumerate() {
                let sy = (y as i64 + j as i64 - ry).clamp(0, h as i64 - 1) as usize;
                let p = tmp[sy * w + x];
                acc[0] += kv * p[0];
                acc[1] += kv * p[1];
                acc[2] += kv * p[2];
            }
            out[y * w + x] = [to_u8(acc[0]), to_u8(acc[1]), to_u8(acc[2])];
        }
    }
    Image::new(img.width(), img.height(), out).expect("same dims")
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> Image {
        Image::from_fn(w, h, |x, y| [(x * 7 % 256) as u8, (y * 11 % 256) as u8, 3]).unwrap()
    }

    #[test]
    fn full_hd_half_crop_is_centered() {
        let r = CropRect::centered(1920, 1080, 0.5).unwrap();
        assert_eq!((r.width, r.height), (960, 540));
        assert_eq!((r.x + r.width / 2, r.y + r.height / 2), (960, 540));
    }

    #[test]
    fn unit_fraction_is_identity() {
        let img = gradient(13, 7);
        assert_eq!(center_crop(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn ten_by_ten_at_point_three() {
        let img = gradient(10, 10);
        let out = center_crop(&img, 0.3).unwrap();
        assert_eq!(out.dims(), (3, 3));
        // hand enumeration: rows/cols 3..=5
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(out.get(x, y), img.get(x + 3, y + 3));
            }
        }
    }

    #[test]
    fn odd_leftover_rounds_corner_down() {
        let r = CropRect::centered(10, 9, 0.5).unwrap();
        assert_eq!((r.x, r.y, r.width, r.height), (2, 2, 5, 4));
    }

    #[test]
    fn rejects_bad_fractions() {
        let img = gradient(4, 4);
        assert!(center_crop(&img, 0.0).is_err());
        assert!(center_crop(&img, -0.1).is_err());
        assert!(center_crop(&img, 1.01).is_err());
        assert!(center_crop(&img, 0.1).is_err(), "0.4 px rounds to an empty crop");
    }

    #[test]
    fn crop_rect_text_roundtrip() {
        let r = CropRect {
            x: 480,
            y: 270,
            width: 960,
            height: 540,
        };
        assert_eq!(r.to_string().parse::<CropRect>().unwrap(), r);
        assert!("1,2,3".parse::<CropRect>().is_err());
    }

    #[test]
    fn sharpen_keeps_uniform_images() {
        let img = Image::filled(6, 5, [40, 130, 190]).unwrap();
        assert_eq!(sharpen(&img), img);
    }

    #[test]
    fn sharpen_single_white_pixel() {
        let mut img = Image::filled(5, 5, [0; 3]).unwrap();
        img.set(2, 2, [255; 3]);
        let out = sharpen(&img);
        // 5*255 clamps to 255; each 4-neighbour sees -255 and clamps to 0
        assert_eq!(out.get(2, 2), [255; 3]);
        for (x, y) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
            assert_eq!(out.get(x, y), [0; 3]);
        }
        assert_eq!(out.get(1, 1), [0; 3]);
    }

    #[test]
    fn sharpen_step_edge_overshoots() {
        // 1-D oracle on a 5-px row [50,50,50,150,150]: with replicated rows the
        // vertical neighbours equal the centre, so out = 3c - left - right.
        let row = [50u8, 50, 50, 150, 150];
        let img = Image::from_fn(5, 3, |x, _| [row[x as usize]; 3]).unwrap();
        let out = sharpen(&img);
        let expect = |i: usize| -> u8 {
            let l = row[i.saturating_sub(1)] as i32;
            let r = row[(i + 1).min(4)] as i32;
            (3 * row[i] as i32 - l - r).clamp(0, 255) as u8
        };
        for x in 0..5 {
            assert_eq!(out.get(x, 1)[0], expect(x as usize));
        }
        assert_eq!(out.get(3, 1)[0], 250, "bright side overshoots");
        assert_eq!(out.get(2, 1)[0], 0, "dark side undershoots");
    }

    #[test]
    fn blur_preserves_constant_and_mean() {
        let img = Image::filled(9, 9, [10, 20, 30]).unwrap();
        assert_eq!(gaussian_blur(&img, 2.0), img);
        assert_eq!(box_blur_horizontal(&img, 4.5), img);
        let mut dot = Image::filled(21, 1, [0; 3]).unwrap();
        dot.set(10, 0, [200; 3]);
        let b = box_blur_horizontal(&dot, 5.0);
        let total: u32 = b.pixels().iter().map(|p| p[0] as u32).sum();
        assert_eq!(total, 200);
    }
}
