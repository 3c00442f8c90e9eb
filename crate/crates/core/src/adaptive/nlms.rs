use num_complex::Complex64;

use super::ops::{axpy, dotc, norm_sq, NoCount, Tally};
use super::{check_len, check_step, guard, AdaptiveFilter, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::numerics::CVector;

/// Full-rank NLMS: `w ← w + μ₀/(r^H r + ε) · e* r`.
#[derive(Debug, Clone)]
pub struct NlmsFilter {
    w: CVector,
    mu0: f64,
    eps: f64,
    iteration: u64,
}

impl NlmsFilter {
    pub fn new(input_dim: usize, mu0: f64) -> Result<Self> {
        Self::with_weights(CVector::zeros(input_dim), mu0, DEFAULT_EPS)
    }

    pub fn with_weights(w: CVector, mu0: f64, eps: f64) -> Result<Self> {
        check_step("mu0", mu0)?;
        if !(eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        Ok(NlmsFilter {
            w,
            mu0,
            eps,
            iteration: 0,
        })
    }

    pub fn weights(&self) -> &CVector {
        &self.w
    }

    pub fn update_counted<T: Tally>(&mut self, r: &CVector, d: Complex64, t: &mut T) -> Result<Complex64> {
        check_len("NLMS input", self.w.len(), r)?;
        let y = dotc(&self.w, r, t);
        t.add(1);
        let e = d - y;
        let rr = norm_sq(r, t);
        if rr == 0.0 {
            return Err(Error::ZeroDenominator("regressor energy"));
        }
        let mu = self.mu0 / (rr + self.eps);
        t.mul(1);
        let a = e.conj() * mu;
        t.mul(1);
        axpy(&mut self.w, a, r, t);
        self.iteration += 1;
        guard(self.iteration, self.w.iter())?;
        Ok(e)
    }
}

impl AdaptiveFilter for NlmsFilter {
    fn input_dim(&self) -> usize {
        self.w.len()
    }

    fn output(&self, r: &CVector) -> Result<Complex64> {
        check_len("NLMS input", self.w.len(), r)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c64, cvec, cvec_re};

    #[test]
    fn unit_step_nulls_a_posteriori_error() {
        let mut f = NlmsFilter::new(3, 1.0).unwrap();
        let r = cvec(&[c64(0.3, -1.0), c64(2.0, 0.5), c64(-0.7, 0.1)]);
        let d = c64(-1.0, 0.4);
        f.update(&r, d).unwrap();
        assert!((d - f.output(&r).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn single_step_from_zero() {
        let mut f = NlmsFilter::new(2, 1.0).unwrap();
        f.update(&cvec_re(&[1.0, 0.0]), c64(1.0, 0.0)).unwrap();
        assert!((f.weights() - cvec_re(&[1.0, 0.0])).norm() < 1e-10);
    }
}
