//! PNG encoding for frames and masks.
//!
//! Binary masks are 8-bit grayscale with exactly the values 0 and 255.
//! Labeled masks are 8-bit grayscale holding the class index (0..=4).
//! Encoding is deterministic, so re-writing an unchanged mask produces a
//! byte-identical file.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use super::{BinaryMask, Image, LabeledMask, PixelClass};
use crate::error::{Error, Result};

fn encode_png(bytes: &[u8], width: u32, height: u32, color: ExtendedColorType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(bytes, width, height, color)?;
    Ok(out)
}

pub fn encode_image(img: &Image) -> Result<Vec<u8>> {
    let raw: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    encode_png(&raw, img.width(), img.height(), ExtendedColorType::Rgb8)
}

pub fn encode_binary_mask(mask: &BinaryMask) -> Result<Vec<u8>> {
    let raw: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_png(&raw, mask.width(), mask.height(), ExtendedColorType::L8)
}

pub fn encode_labeled_mask(mask: &LabeledMask) -> Result<Vec<u8>> {
    let raw: Vec<u8> = mask.classes().iter().map(|&c| c as u8).collect();
    encode_png(&raw, mask.width(), mask.height(), ExtendedColorType::L8)
}

fn decode(bytes: &[u8]) -> Result<DynamicImage> {
    Ok(image::load_from_memory_with_format(bytes, ImageFormat::Png)?)
}

fn decode_gray(bytes: &[u8]) -> Result<image::GrayImage> {
    match decode(bytes)? {
        DynamicImage::ImageLuma8(g) => Ok(g),
        other => Err(Error::Format(format!(
            "mask must be 8-bit grayscale, found {:?}",
            other.color()
        ))),
    }
}

pub fn decode_binary_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let g = decode_gray(bytes)?;
    let (w, h) = g.dimensions();
    let mut bits = Vec::with_capacity(w as usize * h as usize);
    for (x, y, p) in g.enumerate_pixels() {
        match p.0[0] {
            0 => bits.push(false),
            255 => bits.push(true),
            value => return Err(Error::OutOfPalette { value, x, y }),
        }
    }
    BinaryMask::new(w, h, bits)
}

pub fn decode_labeled_mask(bytes: &[u8]) -> Result<LabeledMask> {
    let g = decode_gray(bytes)?;
    let (w, h) = g.dimensions();
    let mut classes = Vec::with_capacity(w as usize * h as usize);
    for (x, y, p) in g.enumerate_pixels() {
        let value = p.0[0];
        classes.push(PixelClass::from_u8(value).ok_or(Error::OutOfPalette { value, x, y })?);
    }
    LabeledMask::new(w, h, classes)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&fs::read(path)?)
}

/// Decodes any PNG into 8-bit RGB.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let rgb = decode(bytes)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| p.0).collect();
    Image::new(w, h, pixels)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_binary_mask(&fs::read(path)?)
}

pub fn read_labeled_mask(path: impl AsRef<Path>) -> Result<LabeledMask> {
    decode_labeled_mask(&fs::read(path)?)
}

pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    write_atomic(path, &encode_image(img)?)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_atomic(path, &encode_binary_mask(mask)?)
}

pub fn write_labeled_mask(path: impl AsRef<Path>, mask: &LabeledMask) -> Result<()> {
    write_atomic(path, &encode_labeled_mask(mask)?)
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a half-written file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let name = path
        .file_name()
        .ok_or_else(|| crate::error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp_name = format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id());
    let tmp = match dir {
        Some(d) => d.join(tmp_name),
        None => tmp_name.into(),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray_png(values: &[u8], w: u32, h: u32) -> Vec<u8> {
        encode_png(values, w, h, ExtendedColorType::L8).unwrap()
    }

    #[test]
    fn rejects_out_of_palette_values() {
        let bytes = gray_png(&[0, 255, 7, 0], 2, 2);
        assert!(matches!(
            decode_binary_mask(&bytes),
            Err(Error::OutOfPalette { value: 7, x: 0, y: 1 })
        ));
        assert!(matches!(
            decode_labeled_mask(&bytes),
            Err(Error::OutOfPalette { value: 255, x: 1, y: 0 })
        ));
        let mid = gray_png(&[0, 128], 2, 1);
        assert!(matches!(decode_binary_mask(&mid), Err(Error::OutOfPalette { value: 128, .. })));
    }

    #[test]
    fn rejects_color_masks_and_garbage() {
        let img = Image::filled(2, 2, [0, 0, 0]).unwrap();
        let bytes = encode_image(&img).unwrap();
        assert!(matches!(decode_binary_mask(&bytes), Err(Error::Format(_))));
        assert!(matches!(decode_binary_mask(b"not a png"), Err(Error::Codec(_))));
    }

    #[test]
    fn full_hd_frame_pixel_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("frame.png");
        let img = Image::from_fn(1920, 1080, |x, y| [(x % 251) as u8, (y % 241) as u8, 9]).unwrap();
        write_image(&p, &img).unwrap();
        let back = read_image(&p).unwrap();
        assert_eq!(back.pixels().len(), 2_073_600);
        assert_eq!(back, img);
    }

    #[test]
    fn labeled_mask_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let classes = (0..20).map(|i| PixelClass::ALL[i % 5]).collect();
        let m = LabeledMask::new(5, 4, classes).unwrap();
        write_labeled_mask(&p, &m).unwrap();
        assert_eq!(read_labeled_mask(&p).unwrap(), m);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn binary_mask_roundtrip_is_bit_exact(w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
            let mut s = seed | 1;
            let mask = BinaryMask::from_fn(w, h, |_, _| {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                s & 1 == 1
            }).unwrap();
            let bytes = encode_binary_mask(&mask).unwrap();
            let back = decode_binary_mask(&bytes).unwrap();
            prop_assert_eq!(&back, &mask);
            prop_assert_eq!(encode_binary_mask(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn random_32x32_mask_roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mask.png");
        let mask = BinaryMask::from_fn(32, 32, |x, y| (x * 31 + y * 17) % 7 < 3).unwrap();
        write_mask(&p, &mask).unwrap();
        assert_eq!(read_mask(&p).unwrap(), mask);
    }
}
