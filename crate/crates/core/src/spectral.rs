//! DFT transforms, frequency grids, filter spectra and the spectral
//! derivative / antiderivative weights.
//!
//! Conventions:
//! * The forward transform is unnormalized; the inverse carries the full
//!   `1 / prod(I_n)` factor, so `sum |x|^2 * P == sum |x_hat|^2`.
//! * Frequencies are in cycles per sample: `k / I` for `k < I / 2` and
//!   `(k - I) / I` otherwise, so the Nyquist bin of an even extent is `-1/2`.
//! * Convolution is circular. Filters are placed centered at index 0, i.e.
//!   filter element `l` along a mode of support `L` sits at offset
//!   `l - floor(L / 2)` (negative offsets wrap to the far end).

use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{LrdError, Result};
use crate::tensor::{row_major_strides, ComplexTensor, DenseTensor, Tensor};
use crate::Scalar;

fn transform_axis<T: Scalar>(
    planner: &mut FftPlanner<T>,
    data: &mut [Complex<T>],
    shape: &[usize],
    axis: usize,
    inverse: bool,
) {
    let len = shape[axis];
    if len == 1 {
        return;
    }
    let fft = if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    };
    let stride: usize = shape[axis + 1..].iter().product();
    if stride == 1 {
        fft.process(data);
        return;
    }
    let outer = data.len() / (len * stride);
    let mut lines = vec![Complex::new(T::zero(), T::zero()); data.len()];
    let mut pos = 0;
    for o in 0..outer {
        let block = o * len * stride;
        for t in 0..stride {
            for k in 0..len {
                lines[pos + k] = data[block + t + k * stride];
            }
            pos += len;
        }
    }
    fft.process(&mut lines);
    pos = 0;
    for o in 0..outer {
        let block = o * len * stride;
        for t in 0..stride {
            for k in 0..len {
                data[block + t + k * stride] = lines[pos + k];
            }
            pos += len;
        }
    }
}

/// In-place N-D DFT of row-major `data`. The inverse is normalized.
pub fn dft_in_place<T: Scalar>(data: &mut [Complex<T>], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::new();
    for axis in 0..shape.len() {
        transform_axis(&mut planner, data, shape, axis, inverse);
    }
    if inverse {
        let scale = T::one() / T::of(data.len() as f64);
        for v in data.iter_mut() {
            *v = *v * scale;
        }
    }
}

/// Unnormalized forward DFT of a real tensor.
pub fn forward_dft<T: Scalar>(t: &DenseTensor<T>) -> ComplexTensor<T> {
    let mut out = t.to_complex();
    let shape = out.shape().to_vec();
    dft_in_place(out.data_mut(), &shape, false);
    out
}

/// Forward DFT of a complex tensor.
pub fn forward_dft_complex<T: Scalar>(t: &ComplexTensor<T>) -> ComplexTensor<T> {
    let mut out = t.clone();
    let shape = out.shape().to_vec();
    dft_in_place(out.data_mut(), &shape, false);
    out
}

/// Inverse DFT including the `1 / prod(I_n)` normalization.
pub fn inverse_dft<T: Scalar>(t: &ComplexTensor<T>) -> ComplexTensor<T> {
    let mut out = t.clone();
    let shape = out.shape().to_vec();
    dft_in_place(out.data_mut(), &shape, true);
    out
}

/// 1-D DFT of every column of `m` (forward or normalized inverse).
pub fn dft_columns<T: Scalar>(m: &Array2<Complex<T>>, inverse: bool) -> Array2<Complex<T>> {
    let (rows, cols) = m.dim();
    // Transposed copy so each column is contiguous.
    let mut buf: Vec<Complex<T>> = m.t().iter().copied().collect();
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(rows)
    } else {
        planner.plan_fft_forward(rows)
    };
    fft.process(&mut buf);
    let scale = if inverse {
        T::one() / T::of(rows as f64)
    } else {
        T::one()
    };
    Array2::from_shape_fn((rows, cols), |(i, r)| buf[r * rows + i] * scale)
}

/// DFT sample frequencies per dimension, in cycles per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid<T> {
    shape: Vec<usize>,
    freqs: Vec<Vec<T>>,
}

/// Frequency of bin `k` out of `len`.
pub fn sample_frequency<T: Scalar>(k: usize, len: usize) -> T {
    if 2 * k < len {
        T::of(k as f64 / len as f64)
    } else {
        T::of((k as f64 - len as f64) / len as f64)
    }
}

impl<T: Scalar> SpectralGrid<T> {
    pub fn new(shape: &[usize]) -> Result<Self> {
        crate::tensor::validate_shape(shape)?;
        let freqs = shape
            .iter()
            .map(|&len| (0..len).map(|k| sample_frequency(k, len)).collect())
            .collect();
        Ok(Self {
            shape: shape.to_vec(),
            freqs,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn freqs(&self, dim: usize) -> &[T] {
        &self.freqs[dim]
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim >= self.shape.len() {
            return Err(LrdError::domain(format!(
                "dimension {dim} out of range for a {}-D grid",
                self.shape.len()
            )));
        }
        Ok(())
    }

    /// Broadcasts a per-bin function of dimension `dim` over the full grid.
    fn broadcast(&self, dim: usize, f: impl Fn(T) -> Complex<T>) -> ComplexTensor<T> {
        let per_bin: Vec<Complex<T>> = self.freqs[dim].iter().map(|&xi| f(xi)).collect();
        Tensor::from_fn(&self.shape, |idx| per_bin[idx[dim]]).expect("grid shape validated")
    }
}

/// How the antiderivative weight is defined on the zero-frequency hyperplane,
/// where `1 / (2 pi j xi)` is singular.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DcPolicy<T> {
    /// Weight 0: the mean is neither penalized nor constrained.
    Zero,
    /// Weight `1 / eps` (real).
    Epsilon(T),
}

impl<T> Default for DcPolicy<T> {
    fn default() -> Self {
        DcPolicy::Zero
    }
}

/// `2 pi j xi_dim` on the full grid.
pub fn derivative_weights<T: Scalar>(grid: &SpectralGrid<T>, dim: usize) -> Result<ComplexTensor<T>> {
    grid.check_dim(dim)?;
    Ok(grid.broadcast(dim, |xi| Complex::new(T::zero(), T::TAU() * xi)))
}

/// `(2 pi j xi_dim)^-1` on the full grid, with the DC hyperplane set by `policy`.
pub fn integral_weights<T: Scalar>(
    grid: &SpectralGrid<T>,
    dim: usize,
    policy: DcPolicy<T>,
) -> Result<ComplexTensor<T>> {
    grid.check_dim(dim)?;
    Ok(grid.broadcast(dim, |xi| {
        if xi == T::zero() {
            match policy {
                DcPolicy::Zero => Complex::new(T::zero(), T::zero()),
                DcPolicy::Epsilon(eps) => Complex::new(T::one() / eps, T::zero()),
            }
        } else {
            Complex::new(T::zero(), T::TAU() * xi).inv()
        }
    }))
}

fn energy_sum<T: Scalar>(weights: impl Iterator<Item = ComplexTensor<T>>, len: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); len];
    for w in weights {
        for (a, v) in acc.iter_mut().zip(w.data()) {
            *a = *a + v.norm_sqr();
        }
    }
    acc
}

/// `sum_d |2 pi xi_d|^2` at every grid point: the squared-gradient multiplier.
pub fn derivative_energy<T: Scalar>(grid: &SpectralGrid<T>) -> Vec<T> {
    let len = grid.shape.iter().product();
    energy_sum(
        (0..grid.shape.len()).map(|d| derivative_weights(grid, d).expect("valid dim")),
        len,
    )
}

/// `sum_d |(2 pi j xi_d)^-1|^2` at every grid point (DC per `policy`).
pub fn integral_energy<T: Scalar>(grid: &SpectralGrid<T>, policy: DcPolicy<T>) -> Vec<T> {
    let len = grid.shape.iter().product();
    energy_sum(
        (0..grid.shape.len()).map(|d| integral_weights(grid, d, policy).expect("valid dim")),
        len,
    )
}

/// Zero-pads a small filter to `shape`, centered at index 0 with circular wrap.
pub fn embed_filter_spatial<T: Scalar>(filter: &DenseTensor<T>, shape: &[usize]) -> Result<DenseTensor<T>> {
    let support = filter.shape();
    if support.len() != shape.len() {
        return Err(LrdError::domain(format!(
            "filter order {} does not match signal order {}",
            support.len(),
            shape.len()
        )));
    }
    if let Some(d) = (0..shape.len()).find(|&d| support[d] > shape[d]) {
        return Err(LrdError::domain(format!(
            "filter extent {} exceeds signal extent {} along mode {d}",
            support[d], shape[d]
        )));
    }
    let mut out = DenseTensor::zeros(shape)?;
    let strides = row_major_strides(shape);
    let mut idx = vec![0usize; support.len()];
    for &v in filter.data() {
        let mut off = 0;
        for d in 0..shape.len() {
            let pos = (idx[d] + shape[d] - support[d] / 2) % shape[d];
            off += pos * strides[d];
        }
        out.data_mut()[off] = v;
        crate::tensor::increment_index(&mut idx, support);
    }
    Ok(out)
}

/// Spectrum of a filter embedded at full signal size.
pub fn embed_filter<T: Scalar>(filter: &DenseTensor<T>, shape: &[usize]) -> Result<ComplexTensor<T>> {
    Ok(forward_dft(&embed_filter_spatial(filter, shape)?))
}

/// Circular convolution of a (small, centered) filter with a full-size signal.
pub fn convolve_circular<T: Scalar>(filter: &DenseTensor<T>, signal: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let fh = embed_filter(filter, signal.shape())?;
    let sh = forward_dft(signal);
    let prod = fh.zip_with(&sh, |a, b| a * b)?;
    Ok(inverse_dft(&prod).real_part())
}

/// Spectra of a filter bank at the full signal shape.
#[derive(Clone, Debug)]
pub struct FilterSpectrum<T> {
    shape: Vec<usize>,
    spectra: Vec<ComplexTensor<T>>,
}

impl<T: Scalar> FilterSpectrum<T> {
    pub fn new(filters: &[DenseTensor<T>], shape: &[usize]) -> Result<Self> {
        let spectra = filters
            .iter()
            .map(|f| embed_filter(f, shape))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            shape: shape.to_vec(),
            spectra,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn get(&self, m: usize) -> &ComplexTensor<T> {
        &self.spectra[m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComplexTensor<T>> {
        self.spectra.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], seed: u64) -> DenseTensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)).unwrap()
    }

    /// Direct O(P^2) circular convolution of two full-size tensors.
    fn naive_circular(a: &DenseTensor<f64>, b: &DenseTensor<f64>) -> DenseTensor<f64> {
        let shape = a.shape().to_vec();
        DenseTensor::from_fn(&shape, |x| {
            let mut acc = 0.0;
            let mut y = vec![0usize; shape.len()];
            for _ in 0..a.len() {
                let xy: Vec<usize> = (0..shape.len()).map(|d| (x[d] + shape[d] - y[d]) % shape[d]).collect();
                acc += a.get(&y) * b.get(&xy);
                crate::tensor::increment_index(&mut y, &shape);
            }
            acc
        })
        .unwrap()
    }

    #[test]
    fn constant_has_only_dc() {
        let t = DenseTensor::full(&[3, 4], 2.5).unwrap();
        let s = forward_dft(&t);
        assert!((s.data()[0] - Complex::new(30.0, 0.0)).norm() < 1e-12);
        assert!(s.data()[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn round_trip() {
        let t = random(&[8, 8], 1);
        let back = inverse_dft(&forward_dft(&t));
        assert!(back.real_part().max_abs_diff(&t) < 1e-12);
        assert!(back.max_abs_imag() < 1e-12);
    }

    #[test]
    fn parseval() {
        for shape in [vec![7], vec![4, 6], vec![3, 4, 5]] {
            let t = random(&shape, 2);
            let p = t.len() as f64;
            let lhs = t.norm_sq() * p;
            let rhs = forward_dft(&t).norm_sq();
            assert!(((lhs - rhs) / lhs).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_theorem() {
        let a = random(&[6, 5], 3);
        let b = random(&[6, 5], 4);
        let spectral = inverse_dft(&forward_dft(&a).zip_with(&forward_dft(&b), |x, y| x * y).unwrap());
        assert!(spectral.real_part().max_abs_diff(&naive_circular(&a, &b)) < 1e-10);
    }

    #[test]
    fn delta_filter_is_flat() {
        let mut d = DenseTensor::<f64>::zeros(&[3, 3]).unwrap();
        d.set(&[1, 1], 1.0);
        let s = embed_filter(&d, &[8, 8]).unwrap();
        assert!(s.data().iter().all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn shifted_delta_is_pure_phase() {
        let mut d = DenseTensor::<f64>::zeros(&[3, 3]).unwrap();
        d.set(&[0, 2], 1.0);
        let s = embed_filter(&d, &[8, 8]).unwrap();
        assert!(s.data().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        // offset (-1, +1): conv output is the input moved by (-1, +1)
        let x = random(&[8, 8], 5);
        let y = convolve_circular(&d, &x).unwrap();
        assert!((y.get(&[0, 1]) - x.get(&[1, 0])).abs() < 1e-12);
    }

    #[test]
    fn averaging_filter_matches_spatial_oracle() {
        let d = DenseTensor::full(&[3, 3], 1.0 / 9.0).unwrap();
        let x = random(&[8, 8], 6);
        let fast = convolve_circular(&d, &x).unwrap();
        let slow = naive_circular(&embed_filter_spatial(&d, &[8, 8]).unwrap(), &x);
        assert!(fast.max_abs_diff(&slow) < 1e-10);
        // centered: the output at (0,0) averages the 3x3 neighbourhood around it
        let mut want = 0.0;
        for di in [7, 0, 1] {
            for dj in [7, 0, 1] {
                want += x.get(&[di, dj]) / 9.0;
            }
        }
        assert!((fast.get(&[0, 0]) - want).abs() < 1e-12);
    }

    #[test]
    fn oversized_filter_rejected() {
        let d = DenseTensor::<f64>::zeros(&[5, 2]).unwrap();
        assert!(embed_filter(&d, &[4, 4]).is_err());
        let e = DenseTensor::<f64>::zeros(&[2]).unwrap();
        assert!(embed_filter(&e, &[4, 4]).is_err());
    }

    #[test]
    fn frequency_convention() {
        let g = SpectralGrid::<f64>::new(&[4, 5]).unwrap();
        assert_eq!(g.freqs(0), &[0.0, 0.25, -0.5, -0.25]);
        assert_eq!(g.freqs(1), &[0.0, 0.2, 0.4, -0.4, -0.2]);
    }

    #[test]
    fn derivative_weight_properties() {
        let g = SpectralGrid::<f64>::new(&[6, 5]).unwrap();
        for dim in 0..2 {
            let w = derivative_weights(&g, dim).unwrap();
            let shape = g.shape().to_vec();
            let mut idx = vec![0; 2];
            for _ in 0..w.len() {
                let v = w.get(&idx);
                if idx[dim] == 0 {
                    assert_eq!(v, Complex::new(0.0, 0.0));
                }
                assert_eq!(v.re, 0.0);
                let neg: Vec<usize> = (0..2).map(|d| (shape[d] - idx[d]) % shape[d]).collect();
                if 2 * idx[dim] != shape[dim] {
                    assert!((v - w.get(&neg).conj()).norm() < 1e-12);
                }
                crate::tensor::increment_index(&mut idx, &shape);
            }
        }
        // Nyquist bin of the even extent
        let w = derivative_weights(&g, 0).unwrap();
        assert!((w.get(&[3, 0]) - Complex::new(0.0, -std::f64::consts::PI)).norm() < 1e-15);
    }

    #[test]
    fn sinusoid_derivative() {
        let len = 32;
        let f = 3.0;
        let w = 2.0 * std::f64::consts::PI * f / len as f64;
        let u = DenseTensor::from_fn(&[len], |i| (w * i[0] as f64).sin()).unwrap();
        let g = SpectralGrid::new(&[len]).unwrap();
        let dw = derivative_weights(&g, 0).unwrap();
        let du = inverse_dft(&forward_dft(&u).zip_with(&dw, |a, b| a * b).unwrap());
        let want = DenseTensor::from_fn(&[len], |i| w * (w * i[0] as f64).cos()).unwrap();
        assert!(du.real_part().max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn integral_weight_properties() {
        let g = SpectralGrid::<f64>::new(&[6, 4]).unwrap();
        for dim in 0..2 {
            let dw = derivative_weights(&g, dim).unwrap();
            let iw = integral_weights(&g, dim, DcPolicy::Zero).unwrap();
            let shape = g.shape().to_vec();
            let mut idx = vec![0; 2];
            for _ in 0..iw.len() {
                if idx[dim] == 0 {
                    assert_eq!(iw.get(&idx), Complex::new(0.0, 0.0));
                } else {
                    assert!((iw.get(&idx) * dw.get(&idx) - Complex::new(1.0, 0.0)).norm() < 1e-12);
                }
                crate::tensor::increment_index(&mut idx, &shape);
            }
        }
        let eps = integral_weights(&g, 0, DcPolicy::Epsilon(1e-3)).unwrap();
        assert_eq!(eps.get(&[0, 2]), Complex::new(1e3, 0.0));
    }

    #[test]
    fn single_tone_integral_energy() {
        let len = 40;
        let f = 5.0;
        let w = 2.0 * std::f64::consts::PI * f / len as f64;
        let u = DenseTensor::from_fn(&[len], |i| (w * i[0] as f64).cos()).unwrap();
        let g = SpectralGrid::new(&[len]).unwrap();
        let uh = forward_dft(&u);
        let iw = integral_weights(&g, 0, DcPolicy::Zero).unwrap();
        let energy = uh.zip_with(&iw, |a, b| a * b).unwrap().norm_sq();
        let want = uh.norm_sq() / (w * w);
        assert!(((energy - want) / want).abs() < 1e-10);
    }

    #[test]
    fn column_dft_round_trip() {
        let m = Array2::from_shape_fn((5, 3), |(i, j)| Complex::new(i as f64 - j as f64, 0.5 * j as f64));
        let back = dft_columns(&dft_columns(&m, false), true);
        assert!((&back - &m).iter().all(|v| v.norm() < 1e-12));
        // column 0 DC
        let f = dft_columns(&m, false);
        let dc: Complex<f64> = m.column(0).iter().sum();
        assert!((f[[0, 0]] - dc).norm() < 1e-12);
    }
}
