//! sRGB to CIELAB conversion (D65 white point).

use crate::grid::ImageGrid;
use crate::scalar::Real;
use crate::RgbGrid;

/// Converts one 8-bit sRGB triple to CIELAB `[L, a, b]`.
///
/// Standard path: sRGB gamma expansion, linear RGB → CIE XYZ under D65,
/// then XYZ → Lab. L lies in `[0, 100]`.
pub fn rgb_to_cielab<S: Real>(r: u8, g: u8, b: u8) -> [S; 3] {
    let rl = srgb_to_linear(S::of(f64::from(r) / 255.0));
    let gl = srgb_to_linear(S::of(f64::from(g) / 255.0));
    let bl = srgb_to_linear(S::of(f64::from(b) / 255.0));

    // sRGB -> XYZ (D65), IEC 61966-2-1 matrix.
    let x = S::of(0.4124564) * rl + S::of(0.3575761) * gl + S::of(0.1804375) * bl;
    let y = S::of(0.2126729) * rl + S::of(0.7151522) * gl + S::of(0.0721750) * bl;
    let z = S::of(0.0193339) * rl + S::of(0.1191920) * gl + S::of(0.9503041) * bl;

    // D65 white as the matrix row sums, so pure white lands exactly on
    // L = 100 and L stays within [0, 100].
    let fx = lab_f(x / S::of(0.9504700));
    let fy = lab_f(y / S::of(1.0000001));
    let fz = lab_f(z / S::of(1.0888300));

    [
        S::of(116.0) * fy - S::of(16.0),
        S::of(500.0) * (fx - fy),
        S::of(200.0) * (fy - fz),
    ]
}

/// Per-pixel conversion of an RGB raster.
pub fn rgb_grid_to_lab<S: Real>(rgb: &RgbGrid) -> ImageGrid<[S; 3]> {
    rgb.map(|&[r, g, b]| rgb_to_cielab(r, g, b))
}

fn srgb_to_linear<S: Real>(c: S) -> S {
    if c <= S::of(0.04045) {
        c / S::of(12.92)
    } else {
        ((c + S::of(0.055)) / S::of(1.055)).powf(S::of(2.4))
    }
}

fn lab_f<S: Real>(t: S) -> S {
    // threshold (6/29)^3; linear segment slope 1/(3 (6/29)^2)
    if t > S::of(216.0 / 24389.0) {
        t.cbrt()
    } else {
        t * S::of(24389.0 / (27.0 * 116.0)) + S::of(16.0 / 116.0)
    }
}
