use super::{Image, LabImage, Rgb};

/// CIELAB triple: `l` in [0, 100], `a`/`b` roughly in [-128, 127].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

// sRGB primaries, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.240_454_2, -1.537_138_5, -0.498_531_4],
    [-0.969_266_0, 1.876_010_8, 0.041_556_0],
    [0.055_643_4, -0.204_025_9, 1.057_225_2],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

// The white reference is the image of linear (1,1,1) under the matrix so that
// neutral grays land exactly on a = b = 0.
fn white() -> [f64; 3] {
    [
        RGB_TO_XYZ[0].iter().sum(),
        RGB_TO_XYZ[1].iter().sum(),
        RGB_TO_XYZ[2].iter().sum(),
    ]
}

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    let v = if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    };
    v * 255.0
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

pub fn srgb_to_lab(rgb: Rgb) -> Lab {
    let lin = [
        srgb_to_linear(rgb[0]),
        srgb_to_linear(rgb[1]),
        srgb_to_linear(rgb[2]),
    ];
    let w = white();
    let mut f = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        let v = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[i] = lab_f(v / w[i]);
    }
    let l = 116.0 * f[1] - 16.0;
    let a = 500.0 * (f[0] - f[1]);
    let b = 200.0 * (f[1] - f[2]);
    Lab {
        l: l.clamp(0.0, 100.0),
        a,
        b,
    }
}

/// Inverse of [`srgb_to_lab`], rounding and clamping into 8-bit sRGB.
pub fn lab_to_rgb(lab: Lab) -> Rgb {
    let w = white();
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let xyz = [lab_f_inv(fx) * w[0], lab_f_inv(fy) * w[1], lab_f_inv(fz) * w[2]];
    let mut out = [0u8; 3];
    for (i, row) in XYZ_TO_RGB.iter().enumerate() {
        let lin = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
        out[i] = linear_to_srgb(lin).round().clamp(0.0, 255.0) as u8;
    }
    out
}

pub fn rgb_to_lab(img: &Image) -> LabImage {
    LabImage {
        width: img.width(),
        height: img.height(),
        pixels: img.pixels().iter().map(|&p| srgb_to_lab(p)).collect(),
    }
}
