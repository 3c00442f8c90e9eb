//! Known-statistics (batch) MMSE designs.
//!
//! Full-rank and reduced-rank Wiener solutions, the alternating
//! projection/filter fixed point, the Krylov (multistage Wiener) projection
//! and the range condition under which a projection loses nothing.

use log::warn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    hermitian_solve, orthonormalize_columns, pinv_rank_limited, CMatrix, CVector, HermitianMatrix,
};

/// Relative residual below which a projection column counts as degenerate.
pub const RANK_TOL: f64 = 1e-10;

/// Relative residual used by [`range_condition`].
pub const RANGE_TOL: f64 = 1e-8;

/// Smallest reduced-rank weight norm accepted by [`optimal_projection`].
pub const MIN_WEIGHT_NORM: f64 = 1e-12;

/// Covariance `R`, cross-correlation `p = E[d* r]` and desired power `σ_d²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderStats {
    pub r: HermitianMatrix,
    pub p: CVector,
    pub sigma_d2: f64,
}

impl SecondOrderStats {
    pub fn new(r: HermitianMatrix, p: CVector, sigma_d2: f64) -> Result<Self> {
        if p.len() != r.dim() {
            return Err(Error::DimensionMismatch {
                context: "cross-correlation length",
                expected: r.dim(),
                actual: p.len(),
            });
        }
        if !(sigma_d2 > 0.0) || !sigma_d2.is_finite() {
            return Err(Error::Config(format!("desired power must be positive, got {sigma_d2}")));
        }
        let ev = r.eigenvalues();
        let top = ev.last().copied().unwrap_or(0.0);
        if ev.first().copied().unwrap_or(0.0) < -1e-10 * top.abs() {
            return Err(Error::Config("covariance is not positive semidefinite".into()));
        }
        let stats = SecondOrderStats { r, p, sigma_d2 };
        let (_, mmse) = full_rank_wiener(&stats)?;
        if mmse < -1e-9 {
            return Err(Error::Config(format!("statistics imply negative MMSE {mmse:.3e}")));
        }
        Ok(stats)
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    /// MSE of an arbitrary full-rank filter `w`: `σ_d² − 2Re(w^H p) + w^H R w`.
    pub fn mse(&self, w: &CVector) -> f64 {
        let rw = self.r.as_matrix() * w;
        self.sigma_d2 - 2.0 * w.dotc(&self.p).re + w.dotc(&rw).re
    }
}

/// An `M×D` dimensionality-reducing matrix, `1 ≤ D ≤ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix(CMatrix);

impl ProjectionMatrix {
    pub fn new(s: CMatrix) -> Result<Self> {
        let (m, d) = s.shape();
        if d == 0 || d > m {
            return Err(Error::Config(format!("projection must be M×D with 1 ≤ D ≤ M, got {m}×{d}")));
        }
        if !crate::numerics::all_finite(s.iter()) {
            return Err(Error::NonFinite("projection matrix"));
        }
        Ok(ProjectionMatrix(s))
    }

    /// `[I_D 0]^T`, the standard initialization.
    pub fn leading_identity(m: usize, d: usize) -> Result<Self> {
        Self::new(CMatrix::identity(m, d))
    }

    pub fn input_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `S^H r`.
    pub fn project(&self, r: &CVector) -> CVector {
        self.0.ad_mul(r)
    }
}

/// A reduced-rank Wiener design for a fixed projection.
#[derive(Debug, Clone)]
pub struct ReducedDesign {
    pub s: ProjectionMatrix,
    pub w_bar: CVector,
    pub mmse: f64,
}

impl ReducedDesign {
    /// The equivalent full-rank filter `S w̄`.
    pub fn effective_weights(&self) -> CVector {
        self.s.as_matrix() * &self.w_bar
    }
}

fn check_projection(stats: &SecondOrderStats, s: &ProjectionMatrix) -> Result<()> {
    if s.input_dim() != stats.dim() {
        return Err(Error::DimensionMismatch {
            context: "projection rows",
            expected: stats.dim(),
            actual: s.input_dim(),
        });
    }
    Ok(())
}

/// `w = R⁻¹p`, `MMSE = σ_d² − p^H R⁻¹ p`.
pub fn full_rank_wiener(stats: &SecondOrderStats) -> Result<(CVector, f64)> {
    let w = hermitian_solve(&stats.r, &stats.p)?;
    let mmse = stats.sigma_d2 - stats.p.dotc(&w).re;
    Ok((w, mmse))
}

/// `(S^H R S, S^H p, σ_d²)`.
pub fn reduce_stats(stats: &SecondOrderStats, s: &ProjectionMatrix) -> Result<SecondOrderStats> {
    check_projection(stats, s)?;
    let sm = s.as_matrix();
    let r_bar = sm.ad_mul(&(stats.r.as_matrix() * sm));
    Ok(SecondOrderStats {
        r: HermitianMatrix::symmetrized(r_bar),
        p: sm.ad_mul(&stats.p),
        sigma_d2: stats.sigma_d2,
    })
}

/// `w̄ = R̄⁻¹p̄` with `MMSE = σ_d² − p̄^H R̄⁻¹ p̄`.
///
/// Rejects projections whose columns are linearly dependent; see
/// [`reduced_wiener_min_norm`] for the variant that accepts them.
pub fn reduced_wiener(stats: &SecondOrderStats, s: &ProjectionMatrix) -> Result<ReducedDesign> {
    check_projection(stats, s)?;
    let basis = orthonormalize_columns(s.as_matrix(), RANK_TOL).map_err(|_| Error::RankDeficient {
        columns: (0..s.rank()).collect(),
    })?;
    if !basis.dropped.is_empty() {
        return Err(Error::RankDeficient {
            columns: basis.dropped,
        });
    }
    let reduced = reduce_stats(stats, s)?;
    let w_bar = hermitian_solve(&reduced.r, &reduced.p)?;
    let mmse = stats.sigma_d2 - reduced.p.dotc(&w_bar).re;
    Ok(ReducedDesign {
        s: s.clone(),
        w_bar,
        mmse,
    })
}

/// Reduced-rank Wiener design that tolerates rank-deficient projections.
///
/// The filter is solved on an orthonormal basis of `range(S)` and mapped back
/// with the minimum-norm `w̄` satisfying `S w̄ = w_eff`. The MMSE depends only
/// on `range(S)`.
pub fn reduced_wiener_min_norm(stats: &SecondOrderStats, s: &ProjectionMatrix) -> Result<ReducedDesign> {
    check_projection(stats, s)?;
    let (w_eff, mmse) = range_wiener(stats, s.as_matrix())?;
    let w_bar = pinv_rank_limited(s.as_matrix(), RANK_TOL)? * w_eff;
    Ok(ReducedDesign {
        s: s.clone(),
        w_bar,
        mmse,
    })
}

/// Best filter constrained to `range(basis)`, and its MMSE.
fn range_wiener(stats: &SecondOrderStats, basis: &CMatrix) -> Result<(CVector, f64)> {
    let q = orthonormalize_columns(basis, RANK_TOL)
        .map_err(|_| Error::RankDeficient {
            columns: (0..basis.ncols()).collect(),
        })?
        .q;
    let r_q = HermitianMatrix::symmetrized(q.ad_mul(&(stats.r.as_matrix() * &q)));
    let p_q = q.ad_mul(&stats.p);
    let coeffs = hermitian_solve(&r_q, &p_q)?;
    let mmse = stats.sigma_d2 - p_q.dotc(&coeffs).re;
    Ok((q * coeffs, mmse))
}

/// MMSE attainable through `S`; depends only on `range(S)`.
pub fn reduced_mmse(stats: &SecondOrderStats, s: &ProjectionMatrix) -> Result<f64> {
    check_projection(stats, s)?;
    Ok(range_wiener(stats, s.as_matrix())?.1)
}

/// Joint cost `E|d − w̄^H S^H r|²` evaluated from second-order statistics.
pub fn joint_cost(stats: &SecondOrderStats, s: &ProjectionMatrix, w_bar: &CVector) -> f64 {
    stats.mse(&(s.as_matrix() * w_bar))
}

/// How the weight covariance `R_w = w̄ w̄^H` enters the projection update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightCovariance {
    /// `S = R⁻¹ P_D R_w⁺`, the stationary point of the joint cost in `S`.
    #[default]
    PseudoInverse,
    /// `S = R⁻¹ P_D R_w`, kept for comparison.
    Direct,
}

/// Projection minimizing the joint cost for fixed `w̄`:
/// `S = R⁻¹ p w̄^H / ‖w̄‖²`.
pub fn optimal_projection(stats: &SecondOrderStats, w_bar: &CVector) -> Result<ProjectionMatrix> {
    optimal_projection_with(stats, w_bar, WeightCovariance::PseudoInverse)
}

pub fn optimal_projection_with(
    stats: &SecondOrderStats,
    w_bar: &CVector,
    form: WeightCovariance,
) -> Result<ProjectionMatrix> {
    let norm2 = w_bar.norm_squared();
    if norm2.sqrt() <= MIN_WEIGHT_NORM {
        return Err(Error::ZeroWeights);
    }
    if w_bar.len() > stats.dim() {
        return Err(Error::DimensionMismatch {
            context: "reduced weights longer than input",
            expected: stats.dim(),
            actual: w_bar.len(),
        });
    }
    let w_opt = hermitian_solve(&stats.r, &stats.p)?;
    let scale = match form {
        WeightCovariance::PseudoInverse => 1.0 / norm2,
        WeightCovariance::Direct => norm2,
    };
    ProjectionMatrix::new((w_opt * w_bar.adjoint()).scale(scale))
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub form: WeightCovariance,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            max_iters: 200,
            tol: 1e-10,
            form: WeightCovariance::PseudoInverse,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointOutcome {
    pub design: ReducedDesign,
    /// MMSE after each filter half-step.
    pub mmse_trace: Vec<f64>,
    pub converged: bool,
}

/// Alternates the reduced-rank Wiener filter and the optimal projection,
/// starting from `init`, until the MMSE changes by less than `tol`.
pub fn alternate_fixed_point(
    stats: &SecondOrderStats,
    init: &ProjectionMatrix,
    opts: FixedPointOptions,
) -> Result<FixedPointOutcome> {
    if opts.max_iters == 0 {
        return Err(Error::Config("fixed point needs at least one iteration".into()));
    }
    check_projection(stats, init)?;
    let mut s = init.clone();
    let mut trace = Vec::with_capacity(opts.max_iters);
    let mut converged = false;
    let mut design = reduced_wiener_min_norm(stats, &s)?;
    trace.push(design.mmse);
    for _ in 1..opts.max_iters {
        s = optimal_projection_with(stats, &design.w_bar, opts.form)?;
        design = reduced_wiener_min_norm(stats, &s)?;
        let prev = trace[trace.len() - 1];
        trace.push(design.mmse);
        if (prev - design.mmse).abs() < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FixedPointOutcome {
        design,
        mmse_trace: trace,
        converged,
    })
}

/// Orthonormal basis of the Krylov subspace `{p, Rp, …, R^{D−1}p}`.
///
/// Built by Arnoldi iteration; when the subspace becomes invariant before
/// `D` vectors, the remaining columns are dropped with a warning.
pub fn krylov_projection(stats: &SecondOrderStats, d: usize) -> Result<ProjectionMatrix> {
    let (s, dropped) = krylov_basis(stats, d)?;
    if dropped > 0 {
        warn!(
            "Krylov subspace invariant at dimension {}; dropping {dropped} column(s)",
            d - dropped
        );
    }
    Ok(s)
}

/// Krylov basis plus the number of columns lost to an invariant subspace.
/// Streaming callers hit this every symbol while the estimates are young,
/// so they use it directly instead of logging.
pub(crate) fn krylov_basis(stats: &SecondOrderStats, d: usize) -> Result<(ProjectionMatrix, usize)> {
    let m = stats.dim();
    if d == 0 || d > m {
        return Err(Error::Config(format!("Krylov rank must be in 1..={m}, got {d}")));
    }
    let p_norm = stats.p.norm();
    if p_norm == 0.0 {
        return Err(Error::ZeroCrossCorrelation);
    }
    let mut basis: Vec<CVector> = vec![stats.p.unscale(p_norm)];
    while basis.len() < d {
        let mut v = stats.r.as_matrix() * basis.last().expect("nonempty basis");
        let norm0 = v.norm();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&v);
                v.axpy(-c, q, Complex64::new(1.0, 0.0));
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= RANK_TOL * norm0 {
            break;
        }
        basis.push(v.unscale(norm));
    }
    let dropped = d - basis.len();
    Ok((ProjectionMatrix::new(CMatrix::from_columns(&basis))?, dropped))
}

#[derive(Debug, Clone, Copy)]
pub struct RangeCondition {
    /// `R⁻¹p` lies in `range(S)`.
    pub holds: bool,
    /// Reduced MMSE minus full-rank MMSE.
    pub mmse_gap: f64,
    /// `‖(I − Q Q^H) R⁻¹p‖ / ‖R⁻¹p‖`.
    pub relative_residual: f64,
}

/// Checks whether `S` preserves the full-rank MMSE.
pub fn range_condition(stats: &SecondOrderStats, s: &ProjectionMatrix) -> Result<RangeCondition> {
    check_projection(stats, s)?;
    let (w_opt, full) = full_rank_wiener(stats)?;
    let q = orthonormalize_columns(s.as_matrix(), RANK_TOL)?.q;
    let residual = &w_opt - &q * q.ad_mul(&w_opt);
    let w_norm = w_opt.norm();
    let relative_residual = if w_norm > 0.0 { residual.norm() / w_norm } else { 0.0 };
    let reduced = reduced_mmse(stats, s)?;
    Ok(RangeCondition {
        holds: relative_residual <= RANGE_TOL,
        mmse_gap: reduced - full,
        relative_residual,
    })
}
