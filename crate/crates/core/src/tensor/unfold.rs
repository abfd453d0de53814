//! n-mode matricization and its inverse.
//!
//! The classical definition uses 1-based indices: entry `(i_n, j)` of the
//! unfolding holds `T[i_1, .., i_N]` with
//! `j = 1 + sum_g (i_{c_g} - 1) * prod_{g' < g} I_{c_{g'}}`, where
//! `c_1 < c_2 < ..` are the modes other than `n`. With 0-based indices this
//! becomes
//!
//! | 1-based            | 0-based (this crate)                  |
//! |--------------------|---------------------------------------|
//! | mode `n` in 1..=N  | mode `n` in 0..N                      |
//! | `i_k` in 1..=I_k   | `i_k` in 0..I_k                       |
//! | `j` in 1..=Λ       | `j = sum_g i_{c_g} * prod_{g'<g} I_{c_{g'}}` |
//!
//! so the first complement mode varies fastest along the columns. This is
//! independent of the row-major storage of the tensor itself.

use ndarray::Array2;

use super::{increment_index, Element, Tensor};
use crate::error::{LrdError, Result};

/// Column stride of every mode in the mode-`n` unfolding (0 for `n` itself).
pub(crate) fn column_strides(shape: &[usize], n: usize) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for (d, &extent) in shape.iter().enumerate() {
        if d != n {
            strides[d] = acc;
            acc *= extent;
        }
    }
    strides
}

fn check_mode(n: usize, ndim: usize) -> Result<()> {
    if n >= ndim {
        return Err(LrdError::domain(format!(
            "mode {n} out of range for an order-{ndim} tensor"
        )));
    }
    Ok(())
}

/// Mode-`n` unfolding: an `I_n x Λ` matrix with `Λ = prod(shape) / I_n`.
pub fn mode_n_matricize<E: Element>(t: &Tensor<E>, n: usize) -> Result<Array2<E>> {
    let shape = t.shape();
    check_mode(n, shape.len())?;
    let rows = shape[n];
    let cols = t.len() / rows;
    let cs = column_strides(shape, n);
    let mut out = Array2::<E>::zeros((rows, cols));
    let mut idx = vec![0usize; shape.len()];
    for &v in t.data() {
        let j: usize = idx.iter().zip(&cs).map(|(i, s)| i * s).sum();
        out[[idx[n], j]] = v;
        increment_index(&mut idx, shape);
    }
    Ok(out)
}

/// Inverse of [`mode_n_matricize`].
pub fn mode_n_fold<E: Element>(m: &Array2<E>, n: usize, shape: &[usize]) -> Result<Tensor<E>> {
    super::validate_shape(shape)?;
    check_mode(n, shape.len())?;
    let total: usize = shape.iter().product();
    let (rows, cols) = m.dim();
    if rows != shape[n] || rows * cols != total {
        return Err(LrdError::domain(format!(
            "{rows}x{cols} matrix cannot fold into mode {n} of shape {shape:?}"
        )));
    }
    let cs = column_strides(shape, n);
    Tensor::from_fn(shape, |idx| {
        let j: usize = idx.iter().zip(&cs).map(|(i, s)| i * s).sum();
        m[[idx[n], j]]
    })
}
