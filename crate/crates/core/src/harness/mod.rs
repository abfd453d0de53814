//! Experimental protocol: noise injection, PSNR, benchmark tables,
//! regularization sweeps and convergence traces.

mod bench;
mod noise;
pub mod synthetic;

pub use bench::*;
pub use noise::{add_awgn, psnr};
pub use synthetic::synthetic_suite;
