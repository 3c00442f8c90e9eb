use crate::error::{Error, Result};
use crate::numerics::CVector;

use super::ExactStats;

/// Trailing window of the BER meter, in symbols.
pub const BER_WINDOW: usize = 200;

/// `10 log10(|w^H s|² / w^H R_in w)`.
pub fn sinr_db(w: &CVector, exact: &ExactStats) -> Result<f64> {
    if w.len() != exact.signal.len() {
        return Err(Error::DimensionMismatch {
            context: "SINR weights",
            expected: exact.signal.len(),
            actual: w.len(),
        });
    }
    let num = w.dotc(&exact.signal).norm_sqr();
    let den = w.dotc(&(exact.interference.as_matrix() * w)).re;
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator("SINR interference power"));
    }
    Ok(10.0 * (num / den).log10())
}

/// Windowed bit error rate over independent runs.
#[derive(Debug, Clone)]
pub struct WindowedBer {
    /// `per_run[run][i]`: errors in the window ending at `i`, divided by the
    /// window's symbol count.
    pub per_run: Vec<Vec<f64>>,
    /// Pooled rate across runs at each index.
    pub mean: Vec<f64>,
}

/// Error rate over the trailing `window` symbols ending at each index
/// (shorter at the start), pooled across runs.
pub fn ber_estimate(decisions: &[Vec<f64>], truth: &[Vec<f64>], window: usize) -> Result<WindowedBer> {
    if window == 0 || decisions.is_empty() {
        return Err(Error::Config("BER needs a non-empty window and at least one run".into()));
    }
    if decisions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "BER runs",
            expected: truth.len(),
            actual: decisions.len(),
        });
    }
    let len = decisions[0].len();
    if len == 0 {
        return Err(Error::Config("BER window is empty".into()));
    }
    let mut per_run = Vec::with_capacity(decisions.len());
    for (dec, tru) in decisions.iter().zip(truth) {
        if dec.len() != len || tru.len() != len {
            return Err(Error::DimensionMismatch {
                context: "BER sequence length",
                expected: len,
                actual: dec.len().min(tru.len()),
            });
        }
        let errors: Vec<u32> = dec.iter().zip(tru).map(|(a, b)| (a != b) as u32).collect();
        let mut rates = Vec::with_capacity(len);
        let mut acc = 0u32;
        for i in 0..len {
            acc += errors[i];
            if i >= window {
                acc -= errors[i - window];
            }
            let count = (i + 1).min(window);
            rates.push(acc as f64 / count as f64);
        }
        per_run.push(rates);
    }
    let runs = per_run.len() as f64;
    let mean = (0..len)
        .map(|i| per_run.iter().map(|r| r[i]).sum::<f64>() / runs)
        .collect();
    Ok(WindowedBer { per_run, mean })
}
