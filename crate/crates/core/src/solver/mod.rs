//! Alternating per-mode minimization of the regularized low-rank
//! deconvolution objective, carried out on DFT-domain factors.
//!
//! Each mode update is an exact minimization of a convex quadratic: the
//! normal equations are split into one `(M R) x (M R)` Hermitian system per
//! index of the active mode (see [`slice`]). For real signals and filters
//! the slice systems come in conjugate pairs `i` / `I_n - i`; with
//! [`SolveOptions::exploit_symmetry`] only one of each pair is solved.
//!
//! Scale conventions: the solver minimizes `P` times the spatial objective
//! (`P = prod(I_n)`, the unnormalized-DFT Parseval factor), with the ridge
//! `alpha/2 ||x_hat||^2` applied to the factor spectra as in the spectral
//! normal equations. Reported [`ObjectiveBreakdown`] values are divided by
//! `P`, so the ridge entry equals `alpha/(2P) sum_{m,n} I_n ||X_m^(n)||^2`.

pub mod linalg;
mod slice;

use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::error::{LrdError, Result};
use crate::regularization::{ObjectiveBreakdown, RegularizationConfig};
use crate::spectral::{
    derivative_energy, dft_columns, forward_dft, integral_energy, inverse_dft, FilterSpectrum, SpectralGrid,
};
use crate::tensor::{kruskal_reconstruct, ComplexTensor, DenseTensor, KruskalFactors};
use crate::Scalar;

use linalg::HermitianCholesky;
use slice::ModeContext;

/// Spectral factors `[m][n]`, each `I_n x R`.
pub type FactorSpectra<T> = Vec<Vec<Array2<Complex<T>>>>;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_outer_iters: usize,
    /// Stop when the relative change of the total objective drops below this.
    pub rel_tol: f64,
    pub seed: u64,
    /// Largest tolerated imaginary part (relative to `max(1, max |re|)`) of
    /// the spatial factors.
    pub imag_purge_tol: f64,
    /// Solve only one slice of every conjugate pair.
    pub exploit_symmetry: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 20,
            rel_tol: 1e-5,
            seed: 0,
            imag_purge_tol: 1e-8,
            exploit_symmetry: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(LrdError::config("max_outer_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(LrdError::config("rel_tol must be positive"));
        }
        if !(self.imag_purge_tol > 0.0 && self.imag_purge_tol.is_finite()) {
            return Err(LrdError::config("imag_purge_tol must be positive"));
        }
        Ok(())
    }
}

/// Seeded uniform `[0, 1)` spatial factors, returned as column spectra.
pub fn init_factors<T: Scalar>(shape: &[usize], rank: usize, filters: usize, seed: u64) -> Result<FactorSpectra<T>> {
    crate::tensor::validate_shape(shape)?;
    if rank == 0 || filters == 0 {
        return Err(LrdError::domain("rank and filter count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..filters)
        .map(|_| {
            shape
                .iter()
                .map(|&extent| {
                    let spatial =
                        Array2::from_shape_fn((extent, rank), |_| Complex::new(T::of(rng.gen::<f64>()), T::zero()));
                    dft_columns(&spatial, false)
                })
                .collect()
        })
        .collect())
}

/// Everything the alternating solver carries between mode updates.
#[derive(Clone, Debug)]
pub struct SolverState<T: Scalar> {
    shape: Vec<usize>,
    rank: usize,
    signal_spectrum: ComplexTensor<T>,
    filter_spectra: FilterSpectrum<T>,
    factors: FactorSpectra<T>,
    config: RegularizationConfig<T>,
    tv_energy: Vec<T>,
    ti_energy: Vec<T>,
    history: Vec<ObjectiveBreakdown<T>>,
}

/// Per-mode diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModeReport {
    pub slices_solved: usize,
    pub dropped_pivots: usize,
}

impl<T: Scalar> SolverState<T> {
    /// State with seeded random initial factors.
    pub fn new(
        signal: &DenseTensor<T>,
        dict: &Dictionary<T>,
        rank: usize,
        config: RegularizationConfig<T>,
        seed: u64,
    ) -> Result<Self> {
        let factors = init_factors(signal.shape(), rank, dict.len(), seed)?;
        Self::with_factor_spectra(signal, dict, config, factors)
    }

    /// State with caller-provided spatial factors (one set per filter).
    pub fn with_spatial_factors(
        signal: &DenseTensor<T>,
        dict: &Dictionary<T>,
        config: RegularizationConfig<T>,
        factors: &[KruskalFactors<T>],
    ) -> Result<Self> {
        let spectra = factors
            .iter()
            .map(|f| {
                f.factors()
                    .iter()
                    .map(|x| dft_columns(&x.mapv(|v| Complex::new(v, T::zero())), false))
                    .collect()
            })
            .collect();
        Self::with_factor_spectra(signal, dict, config, spectra)
    }

    pub fn with_factor_spectra(
        signal: &DenseTensor<T>,
        dict: &Dictionary<T>,
        config: RegularizationConfig<T>,
        factors: FactorSpectra<T>,
    ) -> Result<Self> {
        config.validate(Some(dict.len()))?;
        let shape = signal.shape().to_vec();
        if factors.len() != dict.len() {
            return Err(LrdError::domain(format!(
                "{} factor sets for {} filters",
                factors.len(),
                dict.len()
            )));
        }
        let rank = factors[0].first().map_or(0, |f| f.ncols());
        if rank == 0 {
            return Err(LrdError::domain("rank must be at least 1"));
        }
        for (m, set) in factors.iter().enumerate() {
            if set.len() != shape.len() {
                return Err(LrdError::domain(format!(
                    "filter {m}: {} modes, expected {}",
                    set.len(),
                    shape.len()
                )));
            }
            for (n, f) in set.iter().enumerate() {
                if f.dim() != (shape[n], rank) {
                    return Err(LrdError::domain(format!(
                        "filter {m} mode {n}: factor is {:?}, expected {:?}",
                        f.dim(),
                        (shape[n], rank)
                    )));
                }
            }
        }
        let filter_spectra = FilterSpectrum::new(dict.filters(), &shape)?;
        let grid = SpectralGrid::new(&shape)?;
        Ok(Self {
            signal_spectrum: forward_dft(signal),
            filter_spectra,
            factors,
            tv_energy: derivative_energy(&grid),
            ti_energy: integral_energy(&grid, config.dc_policy),
            config,
            history: Vec::new(),
            rank,
            shape,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn filter_count(&self) -> usize {
        self.filter_spectra.len()
    }

    pub fn signal_spectrum(&self) -> &ComplexTensor<T> {
        &self.signal_spectrum
    }

    pub fn filter_spectra(&self) -> &FilterSpectrum<T> {
        &self.filter_spectra
    }

    pub fn factor_spectra(&self) -> &FactorSpectra<T> {
        &self.factors
    }

    pub fn config(&self) -> &RegularizationConfig<T> {
        &self.config
    }

    pub fn history(&self) -> &[ObjectiveBreakdown<T>] {
        &self.history
    }

    fn size(&self) -> T {
        T::of(self.signal_spectrum.len() as f64)
    }

    /// Spectrum of the activation map of filter `m`.
    ///
    /// Built last mode first: `partial[(i_n, .., i_N), r]` is the product of
    /// the factor entries of modes `n..N`, then summed over `r` at the end.
    fn activation_spectrum(&self, m: usize) -> ComplexTensor<T> {
        let factors = &self.factors[m];
        let rank = self.rank;
        let last = factors.len() - 1;
        let mut partial: Vec<Complex<T>> = factors[last].iter().copied().collect();
        for f in factors[..last].iter().rev() {
            let tail = partial.len() / rank;
            let mut next = Vec::with_capacity(f.nrows() * partial.len());
            for row in f.rows() {
                for t in 0..tail {
                    let p = &partial[t * rank..(t + 1) * rank];
                    next.extend(row.iter().zip(p).map(|(a, b)| *a * *b));
                }
            }
            partial = next;
        }
        let data = partial.chunks_exact(rank).map(|c| c.iter().copied().sum()).collect();
        ComplexTensor::new(self.shape.clone(), data).expect("validated factor shapes")
    }

    /// Spectrum `D_hat_m ⊙ K_hat_m` of one filter's contribution.
    pub fn component_spectrum(&self, m: usize) -> ComplexTensor<T> {
        let mut k = self.activation_spectrum(m);
        for (kv, dv) in k.data_mut().iter_mut().zip(self.filter_spectra.get(m).data()) {
            *kv = *kv * *dv;
        }
        k
    }

    pub fn reconstruction_spectrum(&self) -> ComplexTensor<T> {
        let mut acc = ComplexTensor::zeros(&self.shape).expect("valid shape");
        for m in 0..self.filter_count() {
            let c = self.component_spectrum(m);
            for (a, v) in acc.data_mut().iter_mut().zip(c.data()) {
                *a = *a + *v;
            }
        }
        acc
    }

    /// Current spatial reconstruction `U` (real part of the inverse DFT).
    pub fn reconstruct(&self) -> DenseTensor<T> {
        inverse_dft(&self.reconstruction_spectrum()).real_part()
    }

    /// Per-filter spatial reconstructions `U_m`.
    pub fn reconstruct_components(&self) -> Vec<DenseTensor<T>> {
        (0..self.filter_count())
            .map(|m| inverse_dft(&self.component_spectrum(m)).real_part())
            .collect()
    }

    fn weighted_energy(&self, spectrum: &ComplexTensor<T>, weights: &[T]) -> T {
        spectrum
            .data()
            .iter()
            .zip(weights)
            .map(|(v, &w)| w * v.norm_sqr())
            .sum()
    }

    /// Regularizer terms `(tv, ti)` and the reconstruction spectrum.
    fn regularizer_terms(&self) -> (T, T, ComplexTensor<T>) {
        let two_p = T::of(2.0) * self.size();
        let mut total = ComplexTensor::zeros(&self.shape).expect("valid shape");
        let (mut tv, mut ti) = (T::zero(), T::zero());
        for m in 0..self.filter_count() {
            let c = self.component_spectrum(m);
            if self.config.is_per_filter() {
                let (g, z) = self.config.filter_weights(m);
                if g > T::zero() {
                    tv = tv + g * self.weighted_energy(&c, &self.tv_energy) / two_p;
                }
                if z > T::zero() {
                    ti = ti + z * self.weighted_energy(&c, &self.ti_energy) / two_p;
                }
            }
            for (a, v) in total.data_mut().iter_mut().zip(c.data()) {
                *a = *a + *v;
            }
        }
        if !self.config.is_per_filter() {
            if self.config.gamma > T::zero() {
                tv = self.config.gamma * self.weighted_energy(&total, &self.tv_energy) / two_p;
            }
            if self.config.zeta > T::zero() {
                ti = self.config.zeta * self.weighted_energy(&total, &self.ti_energy) / two_p;
            }
        }
        (tv, ti, total)
    }

    fn ridge_term(&self) -> T {
        let energy: T = self
            .factors
            .iter()
            .flatten()
            .flat_map(|f| f.iter())
            .map(|v| v.norm_sqr())
            .sum();
        self.config.alpha * energy / (T::of(2.0) * self.size())
    }

    /// Objective of the current factors, evaluated spectrally.
    pub fn objective(&self) -> ObjectiveBreakdown<T> {
        let (tv, ti, total) = self.regularizer_terms();
        let data: T = total
            .data()
            .iter()
            .zip(self.signal_spectrum.data())
            .map(|(u, s)| (*u - *s).norm_sqr())
            .sum::<T>()
            / (T::of(2.0) * self.size());
        ObjectiveBreakdown::new(data, tv, ti, self.ridge_term())
    }

    /// Spatial factors; fails if any imaginary residue exceeds `tol`.
    pub fn spatial_factors(&self, tol: f64) -> Result<Vec<KruskalFactors<T>>> {
        let tol = T::of(tol);
        self.factors
            .iter()
            .enumerate()
            .map(|(m, set)| {
                let mats = set
                    .iter()
                    .enumerate()
                    .map(|(n, spectrum)| {
                        let x = dft_columns(spectrum, true);
                        let max_re = x.iter().map(|v| v.re.abs()).fold(T::zero(), T::max);
                        let max_im = x.iter().map(|v| v.im.abs()).fold(T::zero(), T::max);
                        if !(max_im <= tol * max_re.max(T::one())) {
                            return Err(LrdError::Numerical {
                                mode: n,
                                slice: 0,
                                reason: format!(
                                    "filter {m}: spatial factor has imaginary residue {max_im:e} (real scale {max_re:e})"
                                ),
                            });
                        }
                        Ok(x.mapv(|v| v.re))
                    })
                    .collect::<Result<Vec<_>>>()?;
                KruskalFactors::new(mats)
            })
            .collect()
    }

    /// Relative residual `||A x - b|| / ||b||` of slice `(n, i)` at the
    /// current factors.
    pub fn normal_equation_residual(&self, n: usize, i: usize) -> Result<T> {
        let (a, b) = build_slice_system(n, i, self)?;
        let width = b.len();
        let x: Vec<Complex<T>> = (0..self.filter_count())
            .flat_map(|m| (0..self.rank).map(move |r| (m, r)))
            .map(|(m, r)| self.factors[m][n][[i, r]])
            .collect();
        let mut res = T::zero();
        let mut bn = T::zero();
        for k in 0..width {
            let ax: Complex<T> = (0..width)
                .map(|l| a[[k, l]] * x[l])
                .fold(Complex::new(T::zero(), T::zero()), |s, v| s + v);
            res = res + (ax - b[k]).norm_sqr();
            bn = bn + b[k].norm_sqr();
        }
        Ok(if bn > T::zero() { (res / bn).sqrt() } else { res.sqrt() })
    }
}

fn check_mode<T: Scalar>(state: &SolverState<T>, n: usize) -> Result<()> {
    if n >= state.shape.len() {
        return Err(LrdError::domain(format!(
            "mode {n} out of range for an order-{} signal",
            state.shape.len()
        )));
    }
    Ok(())
}

/// Hermitian slice system `(A, b)` for index `i` of mode `n`.
///
/// Unknowns are ordered filter-major: entry `m * R + r` is `X_hat_m^(n)[i, r]`.
pub fn build_slice_system<T: Scalar>(
    n: usize,
    i: usize,
    state: &SolverState<T>,
) -> Result<(Array2<Complex<T>>, Vec<Complex<T>>)> {
    check_mode(state, n)?;
    if i >= state.shape[n] {
        return Err(LrdError::domain(format!("slice {i} out of range for mode {n}")));
    }
    let ctx = ModeContext::new(state, n, i + 1)?;
    let (a, b) = slice::assemble(state, &ctx, i, &mut slice::Workspace::default());
    Ok((slice::to_matrix(a, b.len()), b))
}

/// Exactly minimizes the objective over the mode-`n` factors of every filter.
pub fn solve_mode<T: Scalar>(n: usize, state: &mut SolverState<T>, options: &SolveOptions) -> Result<ModeReport> {
    check_mode(state, n)?;
    let extent = state.shape[n];
    let width = state.filter_count() * state.rank;
    let last = if options.exploit_symmetry {
        extent / 2
    } else {
        extent - 1
    };
    let ctx = ModeContext::new(state, n, last + 1)?;

    let shared: &SolverState<T> = state;
    let solved = (0..=last)
        .into_par_iter()
        .map_init(slice::Workspace::default, |ws, i| {
            let (a, mut b) = slice::assemble(shared, &ctx, i, ws);
            let chol = HermitianCholesky::factor(a, width).map_err(|e| LrdError::Numerical {
                mode: n,
                slice: i,
                reason: format!("{e:?}"),
            })?;
            chol.solve_in_place(&mut b);
            if b.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(LrdError::Numerical {
                    mode: n,
                    slice: i,
                    reason: "non-finite solution".into(),
                });
            }
            Ok((i, b, chol.dropped_pivots()))
        })
        .collect::<Result<Vec<_>>>()?;

    let rank = state.rank;
    let mut report = ModeReport::default();
    for (i, x, dropped) in solved {
        report.slices_solved += 1;
        report.dropped_pivots += dropped;
        let mirror = (extent - i) % extent;
        // self-conjugate slices have a real system; drop rounding noise
        let real = options.exploit_symmetry && mirror == i;
        for (m, set) in state.factors.iter_mut().enumerate() {
            let f = &mut set[n];
            for r in 0..rank {
                let mut v = x[m * rank + r];
                if real {
                    v.im = T::zero();
                }
                f[[i, r]] = v;
                if options.exploit_symmetry && mirror != i {
                    f[[mirror, r]] = v.conj();
                }
            }
        }
    }
    Ok(report)
}

/// Progress notification after each outer iteration.
#[derive(Clone, Copy, Debug)]
pub struct IterationEvent<T> {
    pub iteration: usize,
    /// Solver time so far, excluding time spent in the observer.
    pub elapsed: Duration,
    pub objective: ObjectiveBreakdown<T>,
}

#[derive(Clone, Debug)]
pub struct LrdSolution<T> {
    /// Spatial factors, one set per filter.
    pub factors: Vec<KruskalFactors<T>>,
    pub initial: ObjectiveBreakdown<T>,
    /// One entry per completed outer iteration.
    pub history: Vec<ObjectiveBreakdown<T>>,
    pub iterations: usize,
    pub converged: bool,
    /// Singular directions zeroed by the slice solves, summed over the run.
    pub dropped_pivots: usize,
    pub elapsed: Duration,
}

/// Runs outer sweeps over all modes until the relative objective change
/// falls below `rel_tol` or `max_outer_iters` is reached.
pub fn lrd_solve<T: Scalar>(
    signal: &DenseTensor<T>,
    dict: &Dictionary<T>,
    rank: usize,
    config: &RegularizationConfig<T>,
    options: &SolveOptions,
) -> Result<LrdSolution<T>> {
    let mut state = SolverState::new(signal, dict, rank, config.clone(), options.seed)?;
    run(&mut state, options, |_, _| {})
}

/// [`lrd_solve`] with a callback after every outer iteration.
pub fn lrd_solve_observed<T: Scalar>(
    signal: &DenseTensor<T>,
    dict: &Dictionary<T>,
    rank: usize,
    config: &RegularizationConfig<T>,
    options: &SolveOptions,
    observer: impl FnMut(&IterationEvent<T>, &SolverState<T>),
) -> Result<LrdSolution<T>> {
    let mut state = SolverState::new(signal, dict, rank, config.clone(), options.seed)?;
    run(&mut state, options, observer)
}

/// Runs the outer loop on an existing state; the state keeps the history.
pub fn run<T: Scalar>(
    state: &mut SolverState<T>,
    options: &SolveOptions,
    mut observer: impl FnMut(&IterationEvent<T>, &SolverState<T>),
) -> Result<LrdSolution<T>> {
    options.validate()?;
    let clock = Instant::now();
    let mut observer_time = Duration::ZERO;
    let initial = state.objective();
    if !initial.is_finite() {
        return Err(LrdError::NonFiniteObjective {
            iteration: 0,
            detail: format!("{initial:?}"),
        });
    }
    let mut prev = initial.total;
    let mut converged = false;
    let mut dropped = 0;
    let mut iterations = 0;
    for it in 1..=options.max_outer_iters {
        for n in 0..state.shape.len() {
            dropped += solve_mode(n, state, options)?.dropped_pivots;
        }
        let obj = state.objective();
        if !obj.is_finite() {
            return Err(LrdError::NonFiniteObjective {
                iteration: it,
                detail: format!("{obj:?}"),
            });
        }
        state.history.push(obj);
        iterations = it;
        let event = IterationEvent {
            iteration: it,
            elapsed: clock.elapsed() - observer_time,
            objective: obj,
        };
        let t0 = Instant::now();
        observer(&event, state);
        observer_time += t0.elapsed();

        let scale = prev.abs().max(T::min_positive_value());
        let rel = (prev - obj.total).abs() / scale;
        prev = obj.total;
        if rel < T::of(options.rel_tol) {
            converged = true;
            break;
        }
    }
    let factors = state.spatial_factors(options.imag_purge_tol)?;
    Ok(LrdSolution {
        factors,
        initial,
        history: state.history.clone(),
        iterations,
        converged,
        dropped_pivots: dropped,
        elapsed: clock.elapsed() - observer_time,
    })
}

fn check_factor_set<T: Scalar>(factors: &[KruskalFactors<T>], dict: &Dictionary<T>) -> Result<Vec<usize>> {
    let first = factors
        .first()
        .ok_or_else(|| LrdError::domain("no factor sets given"))?;
    if factors.len() != dict.len() {
        return Err(LrdError::domain(format!(
            "{} factor sets for {} filters",
            factors.len(),
            dict.len()
        )));
    }
    let shape = first.shape();
    if factors.iter().any(|f| f.shape() != shape) {
        return Err(LrdError::domain("factor sets describe different shapes"));
    }
    Ok(shape)
}

/// Per-filter reconstructions `U_m = D_m * [[X_m]]` (circular, via the DFT).
pub fn reconstruct_components<T: Scalar>(
    factors: &[KruskalFactors<T>],
    dict: &Dictionary<T>,
) -> Result<Vec<DenseTensor<T>>> {
    let shape = check_factor_set(factors, dict)?;
    let spectra = FilterSpectrum::new(dict.filters(), &shape)?;
    factors
        .iter()
        .zip(spectra.iter())
        .map(|(f, d)| {
            let k = forward_dft(&kruskal_reconstruct(f));
            Ok(inverse_dft(&k.zip_with(d, |a, b| a * b)?).real_part())
        })
        .collect()
}

/// `U = sum_m D_m * [[X_m]]`.
pub fn reconstruct<T: Scalar>(factors: &[KruskalFactors<T>], dict: &Dictionary<T>) -> Result<DenseTensor<T>> {
    let shape = check_factor_set(factors, dict)?;
    let spectra = FilterSpectrum::new(dict.filters(), &shape)?;
    let mut acc = ComplexTensor::zeros(&shape)?;
    for (f, d) in factors.iter().zip(spectra.iter()) {
        let k = forward_dft(&kruskal_reconstruct(f));
        for ((a, kv), dv) in acc.data_mut().iter_mut().zip(k.data()).zip(d.data()) {
            *a = *a + *kv * *dv;
        }
    }
    Ok(inverse_dft(&acc).real_part())
}

/// Objective of given spatial factors; the data term is computed in the
/// spatial domain, the regularizers spectrally.
pub fn objective<T: Scalar>(
    signal: &DenseTensor<T>,
    dict: &Dictionary<T>,
    factors: &[KruskalFactors<T>],
    config: &RegularizationConfig<T>,
) -> Result<ObjectiveBreakdown<T>> {
    let shape = check_factor_set(factors, dict)?;
    if shape != signal.shape() {
        return Err(LrdError::domain(format!(
            "factors describe shape {shape:?}, signal is {:?}",
            signal.shape()
        )));
    }
    let state = SolverState::with_spatial_factors(signal, dict, config.clone(), factors)?;
    let spectral = state.objective();
    let u = reconstruct(factors, dict)?;
    let data = u
        .data()
        .iter()
        .zip(signal.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        / T::of(2.0);
    Ok(ObjectiveBreakdown::new(data, spectral.tv, spectral.ti, spectral.ridge))
}
