//! Assembly of the per-slice normal equations.
//!
//! For mode `n` the unknowns `x_hat^(n)` are indexed by `(m, r, i)`. Filter
//! spectra act elementwise and `[Q_hat ⊗ I]` never mixes two values of `i`,
//! so the full system splits into `I_n` independent `(M R) x (M R)` Hermitian
//! systems, one per slice `i`. Row `(λ, i)` of the forward operator, restricted
//! to slice `i`, is
//!
//! ```text
//! v_λ[(m, r)] = D_hat_m(λ, i) * Q_hat_m(λ, r)
//! ```
//!
//! and the slice system is
//!
//! ```text
//! A = sum_λ c(λ) conj(v_λ) v_λ^T + alpha I,    b = sum_λ conj(v_λ) S_hat(λ, i)
//! ```
//!
//! with `c = 1 + gamma g_tv + zeta g_ti` in the coupled form. In the
//! per-filter form the data term uses `c = 1` and each filter's diagonal
//! block gains `sum_λ (gamma_m g_tv + zeta_m g_ti) conj(v_λ,m) v_λ,m^T`.

use ndarray::Array2;
use num_complex::Complex;

use super::SolverState;
use crate::error::Result;
use crate::tensor::complement_khatri_rao;
use crate::Scalar;

const GRAM_BLOCK: usize = 16;

/// Everything about mode `n` that is shared by its slices.
///
/// The per-position data of the first `slices` slices is gathered into
/// slice-major buffers so that assembling one slice reads contiguous memory.
pub(crate) struct ModeContext<T> {
    lambda: usize,
    /// `Q_hat_m` as row-major `Λ x R`, one per filter.
    q: Vec<Vec<Complex<T>>>,
    /// `D_hat_m(λ, i)` at `(i * Λ + λ) * M + m`.
    d: Vec<Complex<T>>,
    /// `S_hat(λ, i)`, TV and TI energies at `i * Λ + λ`.
    s: Vec<Complex<T>>,
    tv: Vec<T>,
    ti: Vec<T>,
}

impl<T: Scalar> ModeContext<T> {
    pub fn new(state: &SolverState<T>, n: usize, slices: usize) -> Result<Self> {
        let shape = state.shape();
        let col_strides = crate::tensor::unfold::column_strides(shape, n);
        let total: usize = shape.iter().product();
        let lambda = total / shape[n];
        let q = state
            .factors
            .iter()
            .map(|f| complement_khatri_rao(f, n).map(|m| m.into_raw_vec_and_offset().0))
            .collect::<Result<Vec<_>>>()?;

        // Walk the spectra in storage order and scatter into slice-major order.
        let spectra: Vec<&[Complex<T>]> = state.filter_spectra.iter().map(|t| t.data()).collect();
        let m_count = spectra.len();
        let signal = state.signal_spectrum.data();
        let len = slices * lambda;
        let mut d = vec![czero::<T>(); len * m_count];
        let mut s = vec![czero::<T>(); len];
        let mut tv = vec![T::zero(); len];
        let mut ti = vec![T::zero(); len];
        let mut idx = vec![0usize; shape.len()];
        for p in 0..total {
            let i = idx[n];
            if i < slices {
                let j: usize = idx.iter().zip(&col_strides).map(|(a, b)| a * b).sum();
                let slot = i * lambda + j;
                for (dst, src) in d[slot * m_count..(slot + 1) * m_count].iter_mut().zip(&spectra) {
                    *dst = src[p];
                }
                s[slot] = signal[p];
                tv[slot] = state.tv_energy[p];
                ti[slot] = state.ti_energy[p];
            }
            crate::tensor::increment_index(&mut idx, shape);
        }
        Ok(Self {
            lambda,
            q,
            d,
            s,
            tv,
            ti,
        })
    }
}

#[inline]
fn czero<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Reusable buffers for [`assemble`].
///
/// The rows `v_λ` are kept split as `W = [Vr; Vi]` (`2Λ x cols`, row-major).
/// Then `Re(V^H V) = W^T W` and `Im(V^H V) = X - X^T` with `X = Vr^T Vi`, so
/// the Gram matrix costs two real products on the faster real kernels.
#[derive(Default)]
pub(crate) struct Workspace<T> {
    w: Vec<T>,
    block: Vec<T>,
    re: Vec<T>,
    x: Vec<T>,
}

/// Lower triangle of `V^H V` for `w = [Vr; Vi]` with `lambda` rows per half;
/// `re` and `x` receive `W^T W` (rows `p`, columns `q <= p` valid) and `X`.
fn split_gram<T: Scalar>(w: &[T], lambda: usize, cols: usize, re: &mut Vec<T>, x: &mut Vec<T>) {
    re.clear();
    re.resize(cols * cols, T::zero());
    x.clear();
    x.resize(cols * cols, T::zero());
    let mut p0 = 0;
    while p0 < cols {
        let p1 = (p0 + GRAM_BLOCK).min(cols);
        // SAFETY: `w` is 2 lambda x cols row-major and `re` cols x cols; the
        // block reads columns p0..p1 of `w` and writes rows p0..p1, columns
        // 0..p1 of `re`.
        unsafe {
            T::real_gemm(
                p1 - p0,
                2 * lambda,
                p1,
                T::one(),
                w.as_ptr().add(p0),
                1,
                cols as isize,
                w.as_ptr(),
                cols as isize,
                1,
                T::zero(),
                re.as_mut_ptr().add(p0 * cols),
                cols as isize,
                1,
            );
        }
        p0 = p1;
    }
    // SAFETY: the top half of `w` (transposed) times its bottom half, both
    // lambda x cols, into the cols x cols buffer `x`.
    unsafe {
        T::real_gemm(
            cols,
            lambda,
            cols,
            T::one(),
            w.as_ptr(),
            1,
            cols as isize,
            w.as_ptr().add(lambda * cols),
            cols as isize,
            1,
            T::zero(),
            x.as_mut_ptr(),
            cols as isize,
            1,
        );
    }
}

/// Adds the lower triangle of a split Gram matrix into `a` at `c_off`.
fn add_lower<T: Scalar>(a: &mut [Complex<T>], width: usize, c_off: usize, cols: usize, re: &[T], x: &[T]) {
    for p in 0..cols {
        for q in 0..=p {
            let z = &mut a[c_off + p * width + q];
            *z = *z + Complex::new(re[p * cols + q], x[p * cols + q] - x[q * cols + p]);
        }
    }
}

/// Assembles `(A, b)` for slice `i`; `A` is row-major `(M R) x (M R)` with
/// only its lower triangle filled (the Cholesky never reads above the
/// diagonal; [`to_matrix`] mirrors it for inspection).
pub(crate) fn assemble<T: Scalar>(
    state: &SolverState<T>,
    ctx: &ModeContext<T>,
    i: usize,
    ws: &mut Workspace<T>,
) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let m_count = state.filter_spectra.len();
    let rank = state.rank;
    let width = m_count * rank;
    let lambda = ctx.lambda;
    let cfg = &state.config;
    let base = i * lambda;
    let weight_at = |j: usize, g: T, z: T| g * ctx.tv[base + j] + z * ctx.ti[base + j];
    let coupled = !cfg.is_per_filter() && (cfg.gamma > T::zero() || cfg.zeta > T::zero());

    ws.w.resize(2 * lambda * width, T::zero());
    let (top, bottom) = ws.w.split_at_mut(lambda * width);
    let mut b = vec![czero::<T>(); width];
    for j in 0..lambda {
        let d = &ctx.d[(base + j) * m_count..(base + j + 1) * m_count];
        let s = ctx.s[base + j];
        let c = if coupled {
            (T::one() + weight_at(j, cfg.gamma, cfg.zeta)).sqrt()
        } else {
            T::one()
        };
        let (re_row, im_row) = (
            &mut top[j * width..(j + 1) * width],
            &mut bottom[j * width..(j + 1) * width],
        );
        for m in 0..m_count {
            let q = &ctx.q[m][j * rank..(j + 1) * rank];
            for r in 0..rank {
                let k = m * rank + r;
                let v = d[m] * q[r];
                b[k] = b[k] + v.conj() * s;
                re_row[k] = v.re * c;
                im_row[k] = v.im * c;
            }
        }
    }

    let mut a = vec![czero::<T>(); width * width];
    split_gram(&ws.w, lambda, width, &mut ws.re, &mut ws.x);
    add_lower(&mut a, width, 0, width, &ws.re, &ws.x);

    if cfg.is_per_filter() {
        for m in 0..m_count {
            let (g, z) = cfg.filter_weights(m);
            if g == T::zero() && z == T::zero() {
                continue;
            }
            ws.block.resize(2 * lambda * rank, T::zero());
            for half in 0..2 {
                for j in 0..lambda {
                    let c = weight_at(j, g, z).sqrt();
                    let src = (half * lambda + j) * width + m * rank;
                    let dst = (half * lambda + j) * rank;
                    for r in 0..rank {
                        ws.block[dst + r] = ws.w[src + r] * c;
                    }
                }
            }
            split_gram(&ws.block, lambda, rank, &mut ws.re, &mut ws.x);
            add_lower(&mut a, width, m * rank * width + m * rank, rank, &ws.re, &ws.x);
        }
    }

    for k in 0..width {
        a[k * width + k] = a[k * width + k] + Complex::new(cfg.alpha, T::zero());
    }
    (a, b)
}

/// Full Hermitian `A` as an ndarray matrix, mirrored from its lower triangle.
pub(crate) fn to_matrix<T: Scalar>(a: Vec<Complex<T>>, width: usize) -> Array2<Complex<T>> {
    let mut m = Array2::from_shape_vec((width, width), a).expect("square storage");
    for p in 0..width {
        for q in p + 1..width {
            m[[p, q]] = m[[q, p]].conj();
        }
    }
    m
}
