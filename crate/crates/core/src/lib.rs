//! Low-rank deconvolution of multidimensional signals.
//!
//! A signal `S` is approximated by `sum_m D_m * [[X_m]]`: every filter `D_m`
//! of a dictionary is circularly convolved with a rank-`R` Kruskal tensor.
//! The factors are found by alternating exact minimization in the DFT domain,
//! optionally with squared total-variation and integral penalties on the
//! reconstruction.
//!
//! The core is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the common `f64` case.

pub mod dictionary;
pub mod error;
pub mod harness;
pub mod io;
pub mod regularization;
pub mod restore;
mod scalar;
pub mod solver;
pub mod spectral;
pub mod tensor;

pub use error::{LrdError, Result};
pub use scalar::Scalar;

pub type Tensor = tensor::DenseTensor<f64>;
pub type Tensor32 = tensor::DenseTensor<f32>;
pub type Spectrum = tensor::ComplexTensor<f64>;
pub type Factors = tensor::KruskalFactors<f64>;
pub type Bank = dictionary::Dictionary<f64>;
pub type Regularization = regularization::RegularizationConfig<f64>;
