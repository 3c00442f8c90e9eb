use num_complex::Complex64;

use super::ops::{adjoint_apply, axpy, dotc, norm_sq, NoCount, Tally};
use super::{check_len, check_step, guard, AdaptiveFilter, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::mmse::ProjectionMatrix;
use crate::numerics::{CMatrix, CVector};

/// Normalization of the reduced-rank step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// `μ(i) = μ₀ / (r^H r + ε)`.
    #[default]
    InputNorm,
    /// `μ(i) = μ₀ / (r̄^H r̄ + ε)`, which makes `μ₀ = 1` null the
    /// a-posteriori error of the reduced-rank filter exactly.
    ExactConstraint,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JioConfig {
    pub rank: usize,
    pub mu0: f64,
    pub eta0: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub step_mode: StepMode,
    /// Updates applied per received symbol.
    #[serde(default = "one")]
    pub inner_iterations: usize,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

fn one() -> usize {
    1
}

impl JioConfig {
    pub fn new(rank: usize, mu0: f64, eta0: f64) -> Self {
        JioConfig {
            rank,
            mu0,
            eta0,
            eps: DEFAULT_EPS,
            step_mode: StepMode::InputNorm,
            inner_iterations: 1,
        }
    }
}

/// Jointly adapted projection `S` (`M×D`) and reduced-rank filter `w̄`.
///
/// Per symbol, with `e = d − w̄^H S^H r` from the pre-update filters:
///
/// ```text
/// w̄ ← w̄ + μ(i) e* S^H r
/// S ← S + η(i) e* r w̄^H,    η(i) = η₀ / (‖w̄‖² ‖r‖² + ε)
/// ```
///
/// Both updates consume the same `e` and the same pre-update `w̄`. The
/// `S` update is skipped while `‖w̄‖ < ε`, where its direction vanishes.
#[derive(Debug, Clone)]
pub struct JioNlms {
    s: CMatrix,
    w_bar: CVector,
    cfg: JioConfig,
    iteration: u64,
    last_mu: f64,
    last_eta: f64,
}

impl JioNlms {
    /// Starts from `w̄ = 0`, `S = [I_D 0]^T`.
    pub fn new(input_dim: usize, cfg: JioConfig) -> Result<Self> {
        let s = ProjectionMatrix::leading_identity(input_dim, cfg.rank)?;
        Self::with_state(s, CVector::zeros(cfg.rank), cfg)
    }

    pub fn with_state(s: ProjectionMatrix, w_bar: CVector, cfg: JioConfig) -> Result<Self> {
        check_step("mu0", cfg.mu0)?;
        check_step("eta0", cfg.eta0)?;
        if !(cfg.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if cfg.inner_iterations == 0 {
            return Err(Error::Config("inner_iterations must be at least 1".into()));
        }
        if s.rank() != cfg.rank || w_bar.len() != cfg.rank {
            return Err(Error::DimensionMismatch {
                context: "JIO rank",
                expected: cfg.rank,
                actual: if s.rank() != cfg.rank { s.rank() } else { w_bar.len() },
            });
        }
        Ok(JioNlms {
            s: s.into_matrix(),
            w_bar,
            cfg,
            iteration: 0,
            last_mu: 0.0,
            last_eta: 0.0,
        })
    }

    pub fn config(&self) -> &JioConfig {
        &self.cfg
    }

    pub fn projection(&self) -> &CMatrix {
        &self.s
    }

    pub fn w_bar(&self) -> &CVector {
        &self.w_bar
    }

    /// `(μ(i), η(i))` used by the most recent update; `η` is zero when the
    /// projection update was skipped.
    pub fn last_steps(&self) -> (f64, f64) {
        (self.last_mu, self.last_eta)
    }

    /// One update with operation counting. Ignores `inner_iterations`.
    pub fn update_counted<T: Tally>(&mut self, r: &CVector, d: Complex64, t: &mut T) -> Result<Complex64> {
        check_len("JIO input", self.s.nrows(), r)?;
        let eps = self.cfg.eps;

        let r_bar = adjoint_apply(&self.s, r, t);
        let x = dotc(&self.w_bar, &r_bar, t);
        t.add(1);
        let e = d - x;

        let rr = norm_sq(r, t);
        if rr == 0.0 {
            return Err(Error::ZeroDenominator("regressor energy"));
        }
        let ww = norm_sq(&self.w_bar, t);

        let mu = match self.cfg.step_mode {
            StepMode::InputNorm => self.cfg.mu0 / (rr + eps),
            StepMode::ExactConstraint => self.cfg.mu0 / (norm_sq(&r_bar, t) + eps),
        };
        t.mul(1);
        let a = e.conj() * mu;
        t.mul(1);

        self.last_eta = 0.0;
        if ww.sqrt() >= eps {
            let eta = self.cfg.eta0 / (ww * rr + eps);
            t.mul(2);
            let b = e.conj() * eta;
            t.mul(1);
            let (m, dim) = self.s.shape();
            for k in 0..dim {
                let wk = self.w_bar[k].conj();
                for (s_mk, r_m) in self.s.column_mut(k).iter_mut().zip(r.iter()) {
                    *s_mk += b * (r_m * wk);
                }
            }
            t.mul(2 * m * dim);
            t.add(m * dim);
            self.last_eta = eta;
        }
        axpy(&mut self.w_bar, a, &r_bar, t);
        self.last_mu = mu;

        self.iteration += 1;
        guard(self.iteration, self.w_bar.iter().chain(self.s.iter()))?;
        Ok(e)
    }
}

impl AdaptiveFilter for JioNlms {
    fn input_dim(&self) -> usize {
        self.s.nrows()
    }

    fn output(&self, r: &CVector) -> Result<Complex64> {
        check_len("JIO input", self.s.nrows(), r)?;
        Ok(self.w_bar.dotc(&self.s.ad_mul(r)))
    }

    fn update(&mut self, r: &CVector, d: Complex64) -> Result<Complex64> {
        let e = self.update_counted(r, d, &mut NoCount)?;
        for _ in 1..self.cfg.inner_iterations {
            self.update_counted(r, d, &mut NoCount)?;
        }
        Ok(e)
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }

    fn effective_weights(&self) -> CVector {
        &self.s * &self.w_bar
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::OpCount;
    use crate::numerics::{c64, cvec};

    #[test]
    fn output_conjugates_weights() {
        let cfg = JioConfig::new(2, 0.5, 0.5);
        let s = ProjectionMatrix::new(CMatrix::identity(2, 2)).unwrap();
        let f = JioNlms::with_state(s, cvec(&[c64(1.0, 0.0), c64(0.0, 0.0)]), cfg).unwrap();
        let r = cvec(&[c64(3.0, 1.0), c64(5.0, 0.0)]);
        assert_eq!(f.output(&r).unwrap(), c64(3.0, 1.0));
        let s = ProjectionMatrix::new(CMatrix::identity(2, 2)).unwrap();
        let f = JioNlms::with_state(s, cvec(&[c64(0.0, 1.0), c64(0.0, 0.0)]), cfg).unwrap();
        assert_eq!(f.output(&r).unwrap(), c64(1.0, -3.0));

        let zero = JioNlms::new(2, cfg).unwrap();
        assert_eq!(zero.output(&cvec(&[c64(3.0, 1.0), c64(5.0, 0.0)])).unwrap(), c64(0.0, 0.0));
        assert!(zero.output(&cvec(&[c64(1.0, 0.0)])).is_err());
    }

    #[test]
    fn first_update_from_zero_weights_leaves_projection() {
        let cfg = JioConfig::new(2, 0.4, 0.7);
        let mut f = JioNlms::new(4, cfg).unwrap();
        let r = cvec(&[c64(1.0, -1.0), c64(0.5, 0.0), c64(0.0, 2.0), c64(-1.0, 0.0)]);
        let d = c64(1.0, 0.0);
        let e = f.update(&r, d).unwrap();
        assert_eq!(e, d);
        assert_eq!(f.projection(), &CMatrix::identity(4, 2));
        let rr = r.norm_squared();
        let mu = 0.4 / (rr + cfg.eps);
        let expected = f.projection().ad_mul(&r) * (d.conj() * mu);
        assert!((f.w_bar() - expected).norm() < 1e-15);
        assert_eq!(f.last_steps().1, 0.0);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(JioNlms::new(4, JioConfig::new(5, 0.1, 0.1)).is_err());
        assert!(JioNlms::new(4, JioConfig::new(2, -0.1, 0.1)).is_err());
        assert!(JioNlms::new(4, JioConfig::new(2, 0.1, f64::NAN)).is_err());
        let mut f = JioNlms::new(3, JioConfig::new(1, 0.1, 0.1)).unwrap();
        assert!(matches!(
            f.update(&CVector::zeros(3), c64(1.0, 0.0)),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn divergence_is_reported_with_iteration() {
        let mut f = JioNlms::new(2, JioConfig::new(1, 1.0, 1.0)).unwrap();
        let r = cvec(&[c64(1.0, 0.0), c64(0.0, 0.0)]);
        let err = f.update(&r, c64(1e7, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration: 1 }));
    }

    #[test]
    fn counted_update_matches_plain_update() {
        let cfg = JioConfig::new(3, 0.3, 0.2);
        let mut a = JioNlms::new(6, cfg).unwrap();
        let mut b = a.clone();
        let mut count = OpCount::default();
        for i in 0..5 {
            let r = CVector::from_fn(6, |k, _| c64((k + i) as f64 * 0.3 - 0.7, (k * i) as f64 * 0.1));
            let d = c64(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
            let ea = a.update(&r, d).unwrap();
            let eb = b.update_counted(&r, d, &mut count).unwrap();
            assert_eq!(ea, eb);
        }
        assert_eq!(a.effective_weights(), b.effective_weights());
        assert!(count.mults > 0 && count.adds > 0);
    }
}
