//! Raster primitives shared by every stage of the pipeline.
//!
//! Frames are 8-bit RGB, masks are either binary (net material vs open
//! water) or carry one of the five annotation classes. All types are plain
//! owned buffers in row-major order and are cheap to share between threads.

mod color;
mod io;
mod ops;

pub use color::{lab_to_rgb, rgb_to_lab, srgb_to_lab, Lab};
pub use io::{
    decode_binary_mask, decode_image, decode_labeled_mask, encode_binary_mask, encode_image,
    encode_labeled_mask, read_image, read_labeled_mask, read_mask, write_atomic, write_image,
    write_labeled_mask, write_mask,
};
pub use ops::{box_blur_horizontal, center_crop, crop, gaussian_blur, sharpen, CropRect};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Rgb = [u8; 3];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self> {
        Self::new(width, height, vec![color; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let i = self.index(x, y);
        self.pixels[i] = c;
    }

    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }
}

/// CIELAB raster with the same geometry as the source frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    width: u32,
    height: u32,
    pixels: Vec<Lab>,
}

impl LabImage {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Lab] {
        &self.pixels
    }
}

/// Net-vs-background mask: `true` marks net (or fouling) material.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ensure_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }
}

/// Annotation classes used by the labeling workflow. The discriminant is the
/// value stored in labeled-mask files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum PixelClass {
    Unlabeled = 0,
    Sea = 1,
    Cage = 2,
    Fish = 3,
    Blurry = 4,
}

impl PixelClass {
    pub const ALL: [PixelClass; 5] = [
        PixelClass::Unlabeled,
        PixelClass::Sea,
        PixelClass::Cage,
        PixelClass::Fish,
        PixelClass::Blurry,
    ];

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PixelClass::Unlabeled => "unlabeled",
            PixelClass::Sea => "sea",
            PixelClass::Cage => "cage",
            PixelClass::Fish => "fish",
            PixelClass::Blurry => "blurry",
        }
    }

    /// Parses the wire names `sea`, `cage`, `fish` and `blurry`.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sea" => Some(PixelClass::Sea),
            "cage" => Some(PixelClass::Cage),
            "fish" => Some(PixelClass::Fish),
            "blurry" => Some(PixelClass::Blurry),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledMask {
    width: u32,
    height: u32,
    classes: Vec<PixelClass>,
}

impl LabeledMask {
    pub fn new(width: u32, height: u32, classes: Vec<PixelClass>) -> Result<Self> {
        check_dims(width, height, classes.len())?;
        Ok(Self {
            width,
            height,
            classes,
        })
    }

    pub fn filled(width: u32, height: u32, class: PixelClass) -> Result<Self> {
        Self::new(width, height, vec![class; width as usize * height as usize])
    }

    /// Sea/cage annotation derived from a binary net mask.
    pub fn from_binary(mask: &BinaryMask) -> Self {
        let classes = mask
            .bits()
            .iter()
            .map(|&b| if b { PixelClass::Cage } else { PixelClass::Sea })
            .collect();
        Self {
            width: mask.width(),
            height: mask.height(),
            classes,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn classes(&self) -> &[PixelClass] {
        &self.classes
    }

    pub fn labeled_count(&self) -> usize {
        self.classes
            .iter()
            .filter(|&&c| c != PixelClass::Unlabeled)
            .count()
    }
}

fn check_dims(width: u32, height: u32, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(invalid(format!(
            "raster dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    if len != width as usize * height as usize {
        return Err(invalid(format!(
            "raster of {width}x{height} needs {} pixels, got {len}",
            width as usize * height as usize
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dims_and_wrong_length() {
        assert!(Image::new(0, 3, vec![]).is_err());
        assert!(Image::new(2, 2, vec![[0; 3]; 3]).is_err());
        assert!(BinaryMask::new(2, 2, vec![false; 4]).is_ok());
    }

    #[test]
    fn class_names_roundtrip() {
        for c in &PixelClass::ALL[1..] {
            assert_eq!(PixelClass::from_name(c.name()), Some(*c));
        }
        assert_eq!(PixelClass::from_name("unlabeled"), None);
        assert_eq!(PixelClass::from_u8(5), None);
    }
}
