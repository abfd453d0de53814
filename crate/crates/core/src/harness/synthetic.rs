//! Generated test images. Each spans the full `[0, 1]` range with enough
//! pixels at both ends that its 0.1%/99.9% quantiles are exactly 0 and 1.

use std::f64::consts::PI;

use crate::tensor::DenseTensor;

fn image(size: usize, f: impl Fn(f64, f64) -> f64) -> DenseTensor<f64> {
    let s = size as f64;
    DenseTensor::from_fn(&[size, size], |i| f(i[0] as f64 / s, i[1] as f64 / s).clamp(0.0, 1.0)).unwrap()
}

fn in_disk(y: f64, x: f64, cy: f64, cx: f64, r: f64) -> bool {
    (y - cy).powi(2) + (x - cx).powi(2) <= r * r
}

/// Flat regions separated by sharp edges.
pub fn piecewise_constant(size: usize) -> DenseTensor<f64> {
    image(size, |y, x| {
        if in_disk(y, x, 0.65, 0.6, 0.2) {
            1.0
        } else if (0.12..0.4).contains(&y) && (0.1..0.45).contains(&x) {
            0.0
        } else if x + y > 1.45 {
            0.75
        } else if (0.15..0.35).contains(&y) && x > 0.6 {
            0.55
        } else {
            0.3
        }
    })
}

/// Smooth ramps and a curved edge.
pub fn piecewise_smooth(size: usize) -> DenseTensor<f64> {
    image(size, |y, x| {
        if in_disk(y, x, 0.3, 0.7, 0.15) {
            1.0
        } else if (0.7..0.9).contains(&y) && (0.1..0.3).contains(&x) {
            0.0
        } else if y > 0.5 + 0.15 * (2.0 * PI * x).sin() {
            0.2 + 0.5 * x
        } else {
            0.8 - 0.4 * y - 0.2 * x
        }
    })
}

/// Oriented stripes (saturating at both ends) and a cosine band over a flat
/// background.
pub fn textured(size: usize) -> DenseTensor<f64> {
    image(size, |y, x| {
        if y < 0.5 {
            0.5 + 0.6 * (2.0 * PI * 4.0 * (x + 0.5 * y)).sin()
        } else if x < 0.5 {
            0.5 + 0.35 * (2.0 * PI * 3.0 * y).cos()
        } else {
            0.4
        }
    })
}

/// The three generated images, keyed by a stable id.
pub fn synthetic_suite(size: usize) -> Vec<(String, DenseTensor<f64>)> {
    vec![
        ("piecewise_constant".to_string(), piecewise_constant(size)),
        ("piecewise_smooth".to_string(), piecewise_smooth(size)),
        ("textured".to_string(), textured(size)),
    ]
}
