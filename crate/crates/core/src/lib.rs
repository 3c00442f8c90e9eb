//! Reduced-rank adaptive filtering by joint iterative optimization.
//!
//! A bank of `D` full-rank filters forms an `M×D` projection `S`, and a
//! `D`-tap filter `w̄` estimates the desired signal from `S^H r`. Both are
//! adapted jointly. The crate provides:
//!
//! - [`numerics`]: dense complex linear algebra helpers
//! - [`mmse`]: known-statistics designs and the alternating fixed point
//! - [`adaptive`]: the joint NLMS recursion and full-rank/Krylov baselines
//! - [`convergence`]: the mean-error recursion and its stability test
//! - [`scenario`]: a synchronous DS-CDMA uplink generator with exact statistics
//! - [`harness`]: Monte Carlo experiments, operation counts and output files

pub mod adaptive;
pub mod convergence;
pub mod error;
pub mod harness;
pub mod mmse;
pub mod numerics;
pub mod scenario;

pub use error::{Error, ErrorCategory, Result};
