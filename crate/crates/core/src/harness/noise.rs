//! Noise injection and PSNR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{LrdError, Result};
use crate::tensor::DenseTensor;
use crate::Scalar;

/// Adds i.i.d. Gaussian noise of standard deviation `sigma_255 / 255`.
///
/// `sigma_255` is quoted on the 8-bit scale; the data are assumed to lie in
/// `[0, 1]`. With `clip` the noisy values are clamped back to `[0, 1]`.
pub fn add_awgn<T: Scalar>(t: &DenseTensor<T>, sigma_255: f64, seed: u64, clip: bool) -> Result<DenseTensor<T>> {
    if !(sigma_255 >= 0.0 && sigma_255.is_finite()) {
        return Err(LrdError::domain(format!(
            "noise level must be finite and >= 0, got {sigma_255}"
        )));
    }
    if sigma_255 == 0.0 {
        return Ok(t.clone());
    }
    let normal = Normal::new(0.0, sigma_255 / 255.0).expect("positive finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = t
        .data()
        .iter()
        .map(|x| {
            let v = x.as_f64() + normal.sample(&mut rng);
            T::of(if clip { v.clamp(0.0, 1.0) } else { v })
        })
        .collect();
    DenseTensor::new(t.shape().to_vec(), data)
}

/// `10 log10(peak^2 / MSE)` in dB; `+inf` for identical tensors.
pub fn psnr<T: Scalar>(x: &DenseTensor<T>, reference: &DenseTensor<T>, peak: f64) -> Result<f64> {
    x.check_same_shape(reference)?;
    if x.is_empty() {
        return Err(LrdError::domain("PSNR of an empty tensor"));
    }
    let mse = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| {
            let d = a.as_f64() - b.as_f64();
            d * d
        })
        .sum::<f64>()
        / x.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    })
}
