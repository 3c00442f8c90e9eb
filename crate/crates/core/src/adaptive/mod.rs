//! Streaming adaptive filters, one update per received symbol.
//!
//! [`JioNlms`] is the jointly adapted projection/reduced-rank pair. The
//! baselines are full-rank [`NlmsFilter`] and [`RlsFilter`], and
//! [`KrylovNlms`], a sample-statistics Krylov projection followed by a
//! reduced-rank NLMS filter.

mod decision;
mod jio;
mod krylov;
mod nlms;
pub mod ops;
mod rls;

pub use decision::{run_decision_directed, slice_bpsk, DecisionDirectedTrace};
pub use jio::{JioConfig, JioNlms, StepMode};
pub use krylov::{KrylovNlms, KrylovNlmsConfig};
pub use nlms::NlmsFilter;
pub use ops::{NoCount, OpCount, Tally};
pub use rls::RlsFilter;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::CVector;

/// Entries beyond this magnitude trip the divergence guard.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Default denominator guard for normalized step sizes.
pub const DEFAULT_EPS: f64 = 1e-12;

/// One received vector and its desired (training) symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSample {
    pub r: CVector,
    pub d: Complex64,
}

pub trait AdaptiveFilter: Send {
    fn input_dim(&self) -> usize;

    /// Filter output `x = w^H r` for the current weights.
    fn output(&self, r: &CVector) -> Result<Complex64>;

    /// Adapts towards reference `d` and returns the a-priori error.
    fn update(&mut self, r: &CVector, d: Complex64) -> Result<Complex64>;

    /// Updates processed so far.
    fn iteration(&self) -> u64;

    /// The equivalent full-rank weight vector.
    fn effective_weights(&self) -> CVector;
}

pub(crate) fn check_len(context: &'static str, expected: usize, r: &CVector) -> Result<()> {
    if r.len() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual: r.len(),
        });
    }
    Ok(())
}

pub(crate) fn guard<'a>(iteration: u64, entries: impl IntoIterator<Item = &'a Complex64>) -> Result<()> {
    for z in entries {
        let a = z.norm();
        if !a.is_finite() || a > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { iteration });
        }
    }
    Ok(())
}

pub(crate) fn check_step(name: &str, value: f64) -> Result<()> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::Config(format!("{name} must be a finite non-negative number, got {value}")));
    }
    Ok(())
}
