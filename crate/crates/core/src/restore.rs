//! Denoising and detail enhancement on top of the solver.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::error::{LrdError, Result};
use crate::regularization::{denoise_preset, ObjectiveBreakdown, RegularizationConfig};
use crate::solver::{lrd_solve, reconstruct_components, SolveOptions};
use crate::tensor::DenseTensor;
use crate::Scalar;

/// How a reconstruction is mapped back to valid intensities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Normalization {
    /// Affine map sending the `low`/`high` quantiles of `U` to the reference
    /// range, then clipping to `[0, 1]`.
    PercentileAffine { low: f64, high: f64 },
    /// Clip to `[0, 1]` only.
    Clip,
    /// Leave the reconstruction untouched.
    Identity,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::PercentileAffine {
            low: 0.001,
            high: 0.999,
        }
    }
}

/// Target values for the two quantiles of [`Normalization::PercentileAffine`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceStats {
    pub low: f64,
    pub high: f64,
}

impl ReferenceStats {
    /// The unit intensity range.
    pub fn unit() -> Self {
        Self { low: 0.0, high: 1.0 }
    }

    /// Quantiles of `t` at the levels used by `normalization` (unit range for
    /// the other policies).
    pub fn of<T: Scalar>(t: &DenseTensor<T>, normalization: Normalization) -> Self {
        match normalization {
            Normalization::PercentileAffine { low, high } => Self {
                low: quantile(t, low),
                high: quantile(t, high),
            },
            _ => Self::unit(),
        }
    }
}

impl Default for ReferenceStats {
    fn default() -> Self {
        Self::unit()
    }
}

/// Where [`denoise`] takes its normalization reference from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReferenceSource {
    #[default]
    Unit,
    /// Quantiles of the observed input.
    Input,
}

/// Linear-interpolated quantile, `q` in `[0, 1]`.
pub fn quantile<T: Scalar>(t: &DenseTensor<T>, q: f64) -> f64 {
    let mut v: Vec<f64> = t.data().iter().map(|x| x.as_f64()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

/// Maps `u` into the valid intensity range according to `policy`.
pub fn normalize_output<T: Scalar>(
    u: &DenseTensor<T>,
    policy: Normalization,
    reference: &ReferenceStats,
) -> DenseTensor<T> {
    let clip = |x: f64| T::of(x.clamp(0.0, 1.0));
    match policy {
        Normalization::Identity => u.clone(),
        Normalization::Clip => u.map(|x| clip(x.as_f64())),
        Normalization::PercentileAffine { low, high } => {
            let (a, b) = (quantile(u, low), quantile(u, high));
            let span = b - a;
            if !(span > f64::EPSILON * a.abs().max(b.abs()).max(1.0)) {
                return u.map(|x| clip(x.as_f64()));
            }
            let scale = (reference.high - reference.low) / span;
            u.map(|x| clip(reference.low + (x.as_f64() - a) * scale))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestoreOptions {
    pub solve: SolveOptions,
    pub normalization: Normalization,
    pub reference: ReferenceSource,
    /// Keep the per-filter reconstructions `U_m` in the result.
    pub keep_components: bool,
}

impl Default for RestoreOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            normalization: Normalization::default(),
            reference: ReferenceSource::Unit,
            keep_components: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RestorationResult<T> {
    pub output: DenseTensor<T>,
    pub per_filter_components: Option<Vec<DenseTensor<T>>>,
    /// Objective at initialization followed by one entry per outer iteration.
    pub breakdown: Vec<ObjectiveBreakdown<T>>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

/// Solves with the global squared-TV penalty and normalizes the reconstruction.
pub fn denoise<T: Scalar>(
    signal: &DenseTensor<T>,
    dict: &Dictionary<T>,
    rank: usize,
    gamma: T,
    alpha: T,
    options: &RestoreOptions,
) -> Result<RestorationResult<T>> {
    let config = denoise_preset(gamma, alpha)?;
    denoise_with(signal, dict, rank, &config, options)
}

/// [`denoise`] with an arbitrary regularization configuration.
pub fn denoise_with<T: Scalar>(
    signal: &DenseTensor<T>,
    dict: &Dictionary<T>,
    rank: usize,
    config: &RegularizationConfig<T>,
    options: &RestoreOptions,
) -> Result<RestorationResult<T>> {
    let clock = Instant::now();
    let sol = lrd_solve(signal, dict, rank, config, &options.solve)?;
    let components = reconstruct_components(&sol.factors, dict)?;
    let u = sum_components(signal.shape(), &components, None)?;
    let reference = match options.reference {
        ReferenceSource::Unit => ReferenceStats::unit(),
        ReferenceSource::Input => ReferenceStats::of(signal, options.normalization),
    };
    let output = normalize_output(&u, options.normalization, &reference);
    Ok(RestorationResult {
        output,
        per_filter_components: options.keep_components.then_some(components),
        breakdown: std::iter::once(sol.initial).chain(sol.history).collect(),
        iterations: sol.iterations,
        converged: sol.converged,
        wall_time: clock.elapsed(),
    })
}

fn sum_components<T: Scalar>(
    shape: &[usize],
    components: &[DenseTensor<T>],
    gains: Option<&[T]>,
) -> Result<DenseTensor<T>> {
    let mut acc = DenseTensor::zeros(shape)?;
    for (m, c) in components.iter().enumerate() {
        let g = gains.map_or(T::one(), |g| g[m]);
        if g == T::zero() {
            continue;
        }
        for (a, v) in acc.data_mut().iter_mut().zip(c.data()) {
            *a = *a + g * *v;
        }
    }
    Ok(acc)
}

/// Solves with per-filter weights and returns `S + sum_m delta_m U_m`.
pub fn enhance<T: Scalar>(
    signal: &DenseTensor<T>,
    dict: &Dictionary<T>,
    rank: usize,
    config: &RegularizationConfig<T>,
    options: &RestoreOptions,
) -> Result<RestorationResult<T>> {
    if config.per_filter.is_none() {
        return Err(LrdError::config("enhancement needs per-filter gamma_m/zeta_m"));
    }
    let delta = config
        .delta
        .as_ref()
        .ok_or_else(|| LrdError::config("enhancement needs per-filter delta_m"))?;
    config.validate(Some(dict.len()))?;
    let clock = Instant::now();
    if delta.iter().all(|&d| d == T::zero()) {
        return Ok(RestorationResult {
            output: signal.clone(),
            per_filter_components: None,
            breakdown: Vec::new(),
            iterations: 0,
            converged: true,
            wall_time: clock.elapsed(),
        });
    }
    let sol = lrd_solve(signal, dict, rank, config, &options.solve)?;
    let components = reconstruct_components(&sol.factors, dict)?;
    let detail = sum_components(signal.shape(), &components, Some(delta))?;
    let output = signal.zip_with(&detail, |s, d| s + d)?;
    Ok(RestorationResult {
        output,
        per_filter_components: options.keep_components.then_some(components),
        breakdown: std::iter::once(sol.initial).chain(sol.history).collect(),
        iterations: sol.iterations,
        converged: sol.converged,
        wall_time: clock.elapsed(),
    })
}

/// Dictionaries for multi-channel input: one shared or one per channel.
#[derive(Clone, Copy, Debug)]
pub enum ChannelDictionaries<'a, T> {
    Shared(&'a Dictionary<T>),
    PerChannel(&'a [Dictionary<T>]),
}

impl<'a, T> ChannelDictionaries<'a, T> {
    fn get(&self, c: usize, channels: usize) -> Result<&'a Dictionary<T>> {
        match self {
            ChannelDictionaries::Shared(d) => Ok(d),
            ChannelDictionaries::PerChannel(list) => {
                if list.len() != channels {
                    return Err(LrdError::config(format!(
                        "{} dictionaries for {channels} channels",
                        list.len()
                    )));
                }
                Ok(&list[c])
            }
        }
    }
}

/// Applies `restore` to every channel independently.
pub fn per_channel<T: Scalar>(
    channels: &[DenseTensor<T>],
    dicts: ChannelDictionaries<'_, T>,
    restore: impl Fn(&DenseTensor<T>, &Dictionary<T>) -> Result<RestorationResult<T>> + Sync,
) -> Result<Vec<RestorationResult<T>>> {
    let n = channels.len();
    let resolved = (0..n).map(|c| dicts.get(c, n)).collect::<Result<Vec<_>>>()?;
    channels
        .par_iter()
        .zip(resolved.par_iter())
        .map(|(s, d)| restore(s, d))
        .collect()
}

/// Mean over all positions of the standard deviation in a `window x window`
/// neighbourhood of the last two axes (windows are truncated at borders).
/// Leading axes are treated as independent frames.
pub fn mean_local_std<T: Scalar>(t: &DenseTensor<T>, window: usize) -> f64 {
    let shape = t.shape();
    let (h, w) = match shape.len() {
        0 => return 0.0,
        1 => (1, shape[0]),
        k => (shape[k - 2], shape[k - 1]),
    };
    let frames = t.len() / (h * w);
    let half = window / 2;
    let data = t.data();
    let mut total = 0.0;
    for f in 0..frames {
        let plane = &data[f * h * w..(f + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let (y0, y1) = (y.saturating_sub(half), (y + half + 1).min(h));
                let (x0, x1) = (x.saturating_sub(half), (x + half + 1).min(w));
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                let rows = || (y0..y1).flat_map(|yy| plane[yy * w + x0..yy * w + x1].iter().map(|v| v.as_f64()));
                let mean = rows().sum::<f64>() / n;
                let var = rows().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                total += var.sqrt();
            }
        }
    }
    total / t.len() as f64
}
