//! Dense N-order tensors and the multilinear algebra built on them.
//!
//! Storage is row-major with the last index varying fastest. All mode and
//! index arguments are 0-based; see [`unfold`] for how the classical
//! 1-based unfolding formula translates to this layout.

mod kruskal;
pub mod unfold;

use std::fmt::Debug;

use ndarray::LinalgScalar;
use num_complex::Complex;
use num_traits::Num;

use crate::error::{LrdError, Result};

pub use kruskal::{complement_khatri_rao, khatri_rao, kruskal_reconstruct, kruskal_vec_operator, KruskalFactors};
pub use unfold::{mode_n_fold, mode_n_matricize};

/// Element type a [`Tensor`] can hold: real scalars and their complex
/// counterparts.
pub trait Element: LinalgScalar + Num + Debug + Send + Sync {}

impl<E> Element for E where E: LinalgScalar + Num + Debug + Send + Sync {}

/// N-order array with row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<E> {
    shape: Vec<usize>,
    data: Vec<E>,
}

/// Real-valued tensor (signals, reconstructions, filters).
pub type DenseTensor<T> = Tensor<T>;

/// Complex-valued tensor (spectra).
pub type ComplexTensor<T> = Tensor<Complex<T>>;

pub(crate) fn validate_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(LrdError::domain("tensor must have at least one mode"));
    }
    if let Some(d) = shape.iter().position(|&e| e == 0) {
        return Err(LrdError::domain(format!("extent of mode {d} is zero")));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| LrdError::domain("tensor size overflows usize"))
}

/// Row-major strides for `shape`.
pub fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }
    strides
}

impl<E: Element> Tensor<E> {
    pub fn new(shape: Vec<usize>, data: Vec<E>) -> Result<Self> {
        let len = validate_shape(&shape)?;
        if len != data.len() {
            return Err(LrdError::domain(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = validate_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![E::zero(); len],
        })
    }

    pub fn full(shape: &[usize], value: E) -> Result<Self> {
        let len = validate_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index in storage order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> E) -> Result<Self> {
        let len = validate_shape(shape)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment_index(&mut idx, shape);
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (d, &i) in index.iter().enumerate() {
            debug_assert!(i < self.shape[d]);
            off = off * self.shape[d] + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> E {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: E) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    pub fn map<F: Element>(&self, f: impl Fn(E) -> F) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shape tensors.
    pub fn zip_with(&self, other: &Self, f: impl Fn(E, E) -> E) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(LrdError::domain(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

impl<T: crate::Scalar> Tensor<T> {
    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn to_complex(&self) -> ComplexTensor<T> {
        self.map(|v| Complex::new(v, T::zero()))
    }
}

impl<T: crate::Scalar> Tensor<Complex<T>> {
    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn real_part(&self) -> DenseTensor<T> {
        self.map(|v| v.re)
    }

    pub fn max_abs_imag(&self) -> T {
        self.data.iter().map(|v| v.im.abs()).fold(T::zero(), T::max)
    }
}

/// Advances a row-major multi-index by one position, wrapping at the end.
pub(crate) fn increment_index(idx: &mut [usize], shape: &[usize]) {
    for d in (0..shape.len()).rev() {
        idx[d] += 1;
        if idx[d] < shape[d] {
            return;
        }
        idx[d] = 0;
    }
}
