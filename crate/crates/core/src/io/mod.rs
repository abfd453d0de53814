//! File formats: `.nt` tensors and NetPBM images.

pub mod netpbm;
pub mod nt;
