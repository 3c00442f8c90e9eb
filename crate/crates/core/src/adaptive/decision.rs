use num_complex::Complex64;

use super::{AdaptiveFilter, SymbolSample};
use crate::error::Result;

/// BPSK slicer on the real part; zero maps to `+1`.
pub fn slice_bpsk(x: Complex64) -> f64 {
    if x.re < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Per-symbol record of a training/decision-directed run.
#[derive(Debug, Clone, Default)]
pub struct DecisionDirectedTrace {
    /// Filter output before the update at each symbol.
    pub estimates: Vec<Complex64>,
    /// Sliced decisions `sign(Re x)`.
    pub decisions: Vec<f64>,
}

/// Adapts on the true symbol for the first `n_train` samples and on the
/// sliced decision afterwards.
pub fn run_decision_directed<F, I>(filter: &mut F, samples: I, n_train: usize) -> Result<DecisionDirectedTrace>
where
    F: AdaptiveFilter + ?Sized,
    I: IntoIterator<Item = SymbolSample>,
{
    let mut trace = DecisionDirectedTrace::default();
    for (i, sample) in samples.into_iter().enumerate() {
        let x = filter.output(&sample.r)?;
        let decision = slice_bpsk(x);
        let reference = if i < n_train {
            sample.d
        } else {
            Complex64::new(decision, 0.0)
        };
        filter.update(&sample.r, reference)?;
        trace.estimates.push(x);
        trace.decisions.push(decision);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::NlmsFilter;
    use crate::numerics::{c64, CVector};

    fn samples(n: usize) -> Vec<SymbolSample> {
        (0..n)
            .map(|i| {
                let b = if (i * 7 + 3) % 5 < 2 { -1.0 } else { 1.0 };
                SymbolSample {
                    r: CVector::from_column_slice(&[c64(b, 0.0), c64(0.5 * b, 0.5 * b)]),
                    d: c64(b, 0.0),
                }
            })
            .collect()
    }

    #[test]
    fn full_training_equals_supervised_adaptation() {
        let data = samples(30);
        let mut a = NlmsFilter::new(2, 0.5).unwrap();
        let mut b = a.clone();
        run_decision_directed(&mut a, data.clone(), usize::MAX).unwrap();
        for s in &data {
            b.update(&s.r, s.d).unwrap();
        }
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn noiseless_case_decides_correctly_after_training() {
        let data = samples(200);
        let mut f = NlmsFilter::new(2, 0.5).unwrap();
        let trace = run_decision_directed(&mut f, data.clone(), 20).unwrap();
        for (s, dec) in data.iter().zip(&trace.decisions).skip(20) {
            assert_eq!(*dec, s.d.re);
        }
    }

    #[test]
    fn slicer_maps_zero_to_plus_one() {
        assert_eq!(slice_bpsk(c64(0.0, -3.0)), 1.0);
        assert_eq!(slice_bpsk(c64(-0.1, 3.0)), -1.0);
    }
}
