use num_complex::Complex64;

use super::{check_len, check_step, guard, AdaptiveFilter, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::mmse::{krylov_basis, SecondOrderStats};
use crate::numerics::{CMatrix, CVector, HermitianMatrix};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KrylovNlmsConfig {
    pub rank: usize,
    pub mu0: f64,
    /// Forgetting factor of the running covariance and cross-correlation.
    pub alpha: f64,
    /// The projection is rebuilt every this many symbols.
    pub rebuild_every: usize,
}

impl KrylovNlmsConfig {
    pub fn new(rank: usize, mu0: f64) -> Self {
        KrylovNlmsConfig {
            rank,
            mu0,
            alpha: 0.998,
            rebuild_every: 1,
        }
    }
}

/// Krylov-subspace reduced-rank baseline built from running sample
/// statistics.
///
/// Keeps `R̂ ← αR̂ + r r^H` and `p̂ ← αp̂ + d* r`, periodically replaces the
/// projection by an orthonormal basis of `{p̂, R̂p̂, …, R̂^{D−1}p̂}`, and adapts
/// the `D`-tap filter by NLMS on `S^H r`. This is a sample-statistics
/// surrogate, not the lattice multistage Wiener recursion.
#[derive(Debug, Clone)]
pub struct KrylovNlms {
    cfg: KrylovNlmsConfig,
    r_hat: CMatrix,
    p_hat: CVector,
    s: CMatrix,
    w_bar: CVector,
    iteration: u64,
}

impl KrylovNlms {
    pub fn new(input_dim: usize, cfg: KrylovNlmsConfig) -> Result<Self> {
        check_step("mu0", cfg.mu0)?;
        if cfg.rank == 0 || cfg.rank > input_dim {
            return Err(Error::Config(format!("Krylov rank must be in 1..={input_dim}, got {}", cfg.rank)));
        }
        if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", cfg.alpha)));
        }
        if cfg.rebuild_every == 0 {
            return Err(Error::Config("rebuild_every must be at least 1".into()));
        }
        Ok(KrylovNlms {
            cfg,
            r_hat: CMatrix::zeros(input_dim, input_dim),
            p_hat: CVector::zeros(input_dim),
            s: CMatrix::identity(input_dim, cfg.rank),
            w_bar: CVector::zeros(cfg.rank),
            iteration: 0,
        })
    }

    pub fn projection(&self) -> &CMatrix {
        &self.s
    }

    pub fn cross_correlation_estimate(&self) -> &CVector {
        &self.p_hat
    }

    fn rebuild(&mut self) -> Result<()> {
        if self.p_hat.norm() == 0.0 {
            return Ok(());
        }
        let stats = SecondOrderStats {
            r: HermitianMatrix::symmetrized(self.r_hat.clone()),
            p: self.p_hat.clone(),
            sigma_d2: 1.0,
        };
        let s_new = krylov_basis(&stats, self.cfg.rank)?.0.into_matrix();
        // Carry the effective filter over to the new basis (orthonormal columns).
        let w_eff = &self.s * &self.w_bar;
        self.w_bar = s_new.ad_mul(&w_eff);
        self.s = s_new;
        Ok(())
    }
}

impl AdaptiveFilter for KrylovNlms {
    fn input_dim(&self) -> usize {
        self.s.nrows()
    }

    fn output(&self, r: &CVector) -> Result<Complex64> {
        check_len("Krylov input", self.s.nrows(), r)?;
        Ok(self.w_bar.dotc(&self.s.ad_mul(r)))
    }

    fn update(&mut self, r: &CVector, d: Complex64) -> Result<Complex64> {
        check_len("Krylov input", self.s.nrows(), r)?;
        let r_bar = self.s.ad_mul(r);
        let e = d - self.w_bar.dotc(&r_bar);
        let rr = r_bar.norm_squared();
        let mu = self.cfg.mu0 / (rr + DEFAULT_EPS);
        self.w_bar.axpy(e.conj() * mu, &r_bar, Complex64::new(1.0, 0.0));

        let alpha = self.cfg.alpha;
        self.r_hat.ger(Complex64::new(1.0, 0.0), r, &r.conjugate(), Complex64::new(alpha, 0.0));
        self.p_hat.axpy(d.conj(), r, Complex64::new(alpha, 0.0));

        self.iteration += 1;
        if self.iteration % self.cfg.rebuild_every as u64 == 0 {
            self.rebuild()?;
        }
        guard(self.iteration, self.w_bar.iter())?;
        Ok(e)
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }

    fn effective_weights(&self) -> CVector {
        &self.s * &self.w_bar
    }
}
