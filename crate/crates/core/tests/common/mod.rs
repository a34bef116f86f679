//! Shared helpers for the integration and acceptance suites.
//!
//! Each test binary compiles this module separately, so not every helper is
//! used by every binary.
#![allow(dead_code)]

pub mod oracles;
pub mod scene;

use polymap::grid::ImageGrid;
use polymap::{LabGrid, LabelGrid, MaskGrid};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal sample via Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Relative error against `expected`, floored at 1 to avoid blowups near 0.
pub fn rel_err(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(1.0)
}

pub fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> (usize, usize) {
    (rng.random_range(1..=max), rng.random_range(1..=max))
}

/// Positive depth grid with values in [0.1, 50).
pub fn random_depth_grid(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageGrid<f64> {
    ImageGrid::from_vec(w, h, (0..w * h).map(|_| rng.random_range(0.1..50.0)).collect())
        .unwrap()
}

/// Random mask, re-rolled until at least one pixel is set.
pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> MaskGrid {
    loop {
        let mask = ImageGrid::from_vec(
            w,
            h,
            (0..w * h).map(|_| rng.random_range(0..100) < 85).collect(),
        )
        .unwrap();
        if mask.as_slice().iter().any(|&m| m) {
            return mask;
        }
    }
}

pub fn random_label_grid(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    num_classes: usize,
    with_ignore: bool,
) -> LabelGrid {
    ImageGrid::from_vec(
        w,
        h,
        (0..w * h)
            .map(|_| {
                if with_ignore && rng.random_range(0..20) == 0 {
                    255u8
                } else {
                    rng.random_range(0..num_classes) as u8
                }
            })
            .collect(),
    )
    .unwrap()
}

/// Smooth low-frequency CIELAB image: clustering on it produces compact,
/// realistic superpixels.
pub fn smooth_lab_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> LabGrid {
    let fl = (
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    let fa = (
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    let fb = (
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    let wave = |f: (f64, f64, f64), x: usize, y: usize| {
        let xn = x as f64 / w as f64 * std::f64::consts::TAU;
        let yn = y as f64 / h as f64 * std::f64::consts::TAU;
        (f.0 * xn + f.2).sin() * (f.1 * yn).cos()
    };
    ImageGrid::from_vec(
        w,
        h,
        (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                [
                    50.0 + 35.0 * wave(fl, x, y),
                    40.0 * wave(fa, x, y),
                    40.0 * wave(fb, x, y),
                ]
            })
            .collect(),
    )
    .unwrap()
}

/// Block-structured label grid (labels change every `block` pixels).
pub fn block_labels(w: usize, h: usize, block: usize, num: usize) -> LabelGrid {
    ImageGrid::from_vec(
        w,
        h,
        (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                ((x / block + y / block) % num) as u8
            })
            .collect(),
    )
    .unwrap()
}
