//! Seeded synthetic 16×16 single-channel shape images for fast runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::tensor::Tensor;
use crate::{Error, Result};

const SIDE: usize = 16;

/// Pattern drawn for each class index.
pub const SHAPE_KINDS: [&str; 8] = [
    "horizontal bar",
    "vertical bar",
    "cross",
    "diagonal cross",
    "blob",
    "ring",
    "square outline",
    "diagonal bar",
];

fn inside(kind: usize, dy: f64, dx: f64) -> bool {
    let r = (dy * dy + dx * dx).sqrt();
    let box_r = dy.abs().max(dx.abs());
    match kind {
        0 => dy.abs() < 1.5 && dx.abs() < 6.0,
        1 => dx.abs() < 1.5 && dy.abs() < 6.0,
        2 => (dy.abs() < 1.0 && dx.abs() < 5.0) || (dx.abs() < 1.0 && dy.abs() < 5.0),
        3 => ((dy - dx).abs() < 1.2 || (dy + dx).abs() < 1.2) && box_r < 5.0,
        4 => r < 4.0,
        5 => (3.5..5.5).contains(&r),
        6 => (4.0..5.5).contains(&box_r),
        _ => (dy + dx).abs() < 1.5 && box_r < 6.0,
    }
}

/// `num_per_class` images for each of `classes` shape kinds. `noise` sets both
/// the standard deviation of additive Gaussian pixel noise and the positional
/// jitter (up to `round(3 * noise)` pixels); at zero noise every image of a
/// class is identical. Pixels are clamped to `[0, 1]`.
pub fn synth_shapes(
    num_per_class: usize,
    classes: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(2..=SHAPE_KINDS.len()).contains(&classes) {
        return Err(Error::InvalidArgument(format!(
            "synthetic shapes support 2..={} classes, got {classes}",
            SHAPE_KINDS.len()
        )));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise must be non-negative, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixel_noise = Normal::new(0.0, noise).expect("non-negative std");
    let jitter = (3.0 * noise).round() as i64;
    let centre = (SIDE as f64 - 1.0) / 2.0;

    let n = num_per_class * classes;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for s in 0..n {
        let class = s % classes;
        let (oy, ox) = if jitter > 0 {
            (
                rng.random_range(-jitter..=jitter) as f64,
                rng.random_range(-jitter..=jitter) as f64,
            )
        } else {
            (0.0, 0.0)
        };
        let mut px = Vec::with_capacity(SIDE * SIDE);
        for y in 0..SIDE {
            for x in 0..SIDE {
                let base = if inside(class, y as f64 - centre - oy, x as f64 - centre - ox) {
                    1.0
                } else {
                    0.0
                };
                let v = if noise > 0.0 {
                    base + pixel_noise.sample(&mut rng)
                } else {
                    base
                };
                px.push(v.clamp(0.0, 1.0));
            }
        }
        images.push(Tensor::new(vec![1, SIDE, SIDE], px)?);
        labels.push(class);
    }
    Dataset::new(images, labels, (0..n as u64).collect(), classes)
}
