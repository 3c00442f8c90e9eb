use num_complex::Complex64;

use super::ops::{dotc, NoCount, Tally};
use super::{check_len, guard, AdaptiveFilter};
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, CVector};

/// Exponentially weighted full-rank RLS.
///
/// ```text
/// k = P r / (λ + r^H P r)
/// w ← w + k e*
/// P ← (P − k r^H P) / λ
/// ```
///
/// `P` is re-symmetrized after every update.
#[derive(Debug, Clone)]
pub struct RlsFilter {
    w: CVector,
    p: CMatrix,
    lambda: f64,
    iteration: u64,
}

impl RlsFilter {
    /// `P(0) = δ⁻¹ I`, `w(0) = 0`.
    pub fn new(input_dim: usize, lambda: f64, delta: f64) -> Result<Self> {
        if !(lambda > 0.9 && lambda <= 1.0) {
            return Err(Error::Config(format!("forgetting factor must lie in (0.9, 1], got {lambda}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("RLS regularization must be positive, got {delta}")));
        }
        Ok(RlsFilter {
            w: CVector::zeros(input_dim),
            p: CMatrix::identity(input_dim, input_dim).unscale(delta),
            lambda,
            iteration: 0,
        })
    }

    pub fn weights(&self) -> &CVector {
        &self.w
    }

    pub fn inverse_covariance(&self) -> &CMatrix {
        &self.p
    }

    pub fn update_counted<T: Tally>(&mut self, r: &CVector, d: Complex64, t: &mut T) -> Result<Complex64> {
        let m = self.w.len();
        check_len("RLS input", m, r)?;

        let pr = &self.p * r;
        t.mul(m * m);
        t.add(m * (m - 1));
        let denom = self.lambda + dotc(r, &pr, t).re;
        t.add(1);
        if !(denom > 0.0) {
            return Err(Error::Divergence {
                iteration: self.iteration + 1,
            });
        }
        let inv = 1.0 / denom;
        t.mul(1);
        let k = pr.scale(inv);
        t.mul(m);

        let y = dotc(&self.w, r, t);
        t.add(1);
        let e = d - y;
        self.w.axpy(e.conj(), &k, Complex64::new(1.0, 0.0));
        t.mul(m);
        t.add(m);

        // r^H P = (P r)^H because P is Hermitian.
        let inv_lambda = 1.0 / self.lambda;
        t.mul(1);
        for j in 0..m {
            let prj = pr[j].conj();
            for i in 0..m {
                let v = self.p[(i, j)] - k[i] * prj;
                self.p[(i, j)] = v * inv_lambda;
            }
        }
        t.mul(2 * m * m);
        t.add(m * m);

        for i in 0..m {
            self.p[(i, i)].im = 0.0;
            for j in i + 1..m {
                let v = (self.p[(i, j)] + self.p[(j, i)].conj()) * 0.5;
                self.p[(i, j)] = v;
                self.p[(j, i)] = v.conj();
            }
        }
        t.add(m * (m - 1) / 2);
        t.mul(m * (m - 1) / 2);

        self.iteration += 1;
        guard(self.iteration, self.w.iter())?;
        if !crate::numerics::all_finite(self.p.iter()) {
            return Err(Error::Divergence {
                iteration: self.iteration,
            });
        }
        Ok(e)
    }
}

impl AdaptiveFilter for RlsFilter {
    fn input_dim(&self) -> usize {
        self.w.len()
    }

    fn output(&self, r: &CVector) -> Result<Complex64> {
        check_len("RLS input", self.w.len(), r)?;
        Ok(self.w.dotc(r))
    }

    fn update(&mut self, r: &CVector, d: Complex64) -> Result<Complex64> {
        self.update_counted(r, d, &mut NoCount)
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }

    fn effective_weights(&self) -> CVector {
        self.w.clone()
    }
}
