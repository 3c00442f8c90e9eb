//! Mean-error convergence model of the joint NLMS recursion.
//!
//! With `e_w̄(i) = w̄(i) − w̄_opt` and `e_S(i) = S(i) − S_opt`, the expected
//! errors evolve as
//!
//! ```text
//! [E e_w̄(i+1)]   [ I − E[μ] R̄             0                ] [E e_w̄(i)]
//! [E e_S(i+1)] = [ E[ν] σ_w² R S_opt      I − E[ν] σ_w² R   ] [E e_S(i)] + B
//! ```
//!
//! with `R̄ = S_opt^H R S_opt` and `σ_w² = E‖w̄(i)‖²`. The projection error
//! lives in `vec(S)` space (column-major, dimension `MD`), where the lower
//! blocks act through a Kronecker lift over the `D` columns.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adaptive::{AdaptiveFilter, JioConfig, JioNlms};
use crate::error::{Error, Result};
use crate::mmse::{alternate_fixed_point, range_condition, FixedPointOptions, ProjectionMatrix, SecondOrderStats};
use crate::numerics::{hermitian_solve, pinv_rank_limited, spectral_radius, CMatrix, CVector, HermitianMatrix};

/// A jointly optimal `(w̄, S)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPair {
    pub w_opt: CVector,
    pub s_opt: ProjectionMatrix,
}

impl OptimalPair {
    pub fn new(w_opt: CVector, s_opt: ProjectionMatrix) -> Result<Self> {
        if w_opt.len() != s_opt.rank() {
            return Err(Error::DimensionMismatch {
                context: "optimal pair",
                expected: s_opt.rank(),
                actual: w_opt.len(),
            });
        }
        Ok(OptimalPair { w_opt, s_opt })
    }

    /// Runs the alternating fixed point from `init` and checks that the
    /// result attains the full-rank MMSE.
    pub fn from_fixed_point(stats: &SecondOrderStats, init: &ProjectionMatrix) -> Result<Self> {
        let out = alternate_fixed_point(stats, init, FixedPointOptions::default())?;
        if !out.converged {
            return Err(Error::NoConvergence);
        }
        let s = out.design.s;
        let cond = range_condition(stats, &s)?;
        if !cond.holds {
            log::warn!("fixed point misses the full-rank MMSE by {:e}", cond.mmse_gap);
        }
        OptimalPair::new(out.design.w_bar, s)
    }

    /// The representative with unit-norm projection columns; `S_opt w̄_opt`
    /// is unchanged. Zero columns are left alone.
    pub fn normalized(&self) -> Result<Self> {
        let mut s = self.s_opt.as_matrix().clone();
        let mut w = self.w_opt.clone();
        for k in 0..s.ncols() {
            let n = s.column(k).norm();
            if n > 0.0 {
                s.column_mut(k).unscale_mut(n);
                w[k] *= n;
            }
        }
        OptimalPair::new(w, ProjectionMatrix::new(s)?)
    }

    pub fn effective_weights(&self) -> CVector {
        self.s_opt.as_matrix() * &self.w_opt
    }
}

/// Mean-error recursion `E e(i+1) = A E e(i) + B` over the stacked state
/// `[e_w̄; vec(e_S)]`.
#[derive(Debug, Clone)]
pub struct ConvergenceModel {
    pub a: CMatrix,
    pub b: CVector,
    pub mu_mean: f64,
    pub nu_mean: f64,
    pub sigma_w2: f64,
    pub rank: usize,
    pub input_dim: usize,
}

impl ConvergenceModel {
    /// Iterates the mean recursion from `e0` and returns the norm of the
    /// `w̄` and `S` parts after each step.
    pub fn propagate(&self, e0: &CVector, steps: usize) -> Result<Vec<(f64, f64)>> {
        if e0.len() != self.a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "initial error",
                expected: self.a.nrows(),
                actual: e0.len(),
            });
        }
        let d = self.rank;
        let mut e = e0.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            e = &self.a * e + &self.b;
            out.push((e.rows(0, d).norm(), e.rows(d, e.len() - d).norm()));
        }
        Ok(out)
    }
}

/// Builds `A` and `B`.
///
/// `R̄` uses `S_opt`. The `w̄`-to-`S` coupling `E[ν]σ_w² R S_opt` maps a
/// `D`-vector to an `M`-vector; it is lifted by adding that vector to every
/// column, and the projection block acts as `I_D ⊗ (I − E[ν]σ_w² R)`. The
/// first entry of `B` is `E[μ] S^H (R S w̄_opt − p)` at the supplied current
/// `S`, the reduced-space form of the drift; the second is lifted like the
/// coupling block.
pub fn build_model(
    stats: &SecondOrderStats,
    opt: &OptimalPair,
    s_current: &ProjectionMatrix,
    mu_mean: f64,
    nu_mean: f64,
    sigma_w2: f64,
) -> Result<ConvergenceModel> {
    let m = stats.dim();
    let d = opt.s_opt.rank();
    for (what, dim) in [
        ("optimal projection rows", opt.s_opt.input_dim()),
        ("current projection rows", s_current.input_dim()),
    ] {
        if dim != m {
            return Err(Error::DimensionMismatch {
                context: what,
                expected: m,
                actual: dim,
            });
        }
    }
    if s_current.rank() != d {
        return Err(Error::DimensionMismatch {
            context: "current projection rank",
            expected: d,
            actual: s_current.rank(),
        });
    }
    for v in [mu_mean, nu_mean, sigma_w2] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::NonFinite("step statistics"));
        }
    }

    let r = stats.r.as_matrix();
    let s_opt = opt.s_opt.as_matrix();
    let s = s_current.as_matrix();
    let g = nu_mean * sigma_w2;
    let n = d + m * d;

    let mut a = CMatrix::zeros(n, n);
    let r_bar = s_opt.adjoint() * r * s_opt;
    let top = CMatrix::identity(d, d) - r_bar.scale(mu_mean);
    a.view_mut((0, 0), (d, d)).copy_from(&top);
    let coupling = (r * s_opt).scale(g);
    let diag = CMatrix::identity(m, m) - r.scale(g);
    for k in 0..d {
        let at = d + k * m;
        a.view_mut((at, 0), (m, d)).copy_from(&coupling);
        a.view_mut((at, at), (m, m)).copy_from(&diag);
    }

    let mut b = CVector::zeros(n);
    let drift_w = s.adjoint() * (r * s * &opt.w_opt - &stats.p);
    b.rows_mut(0, d).copy_from(&drift_w.scale(mu_mean));
    let drift_s = (r * s_opt * &opt.w_opt - &stats.p).scale(g);
    for k in 0..d {
        b.rows_mut(d + k * m, m).copy_from(&drift_s);
    }

    if !crate::numerics::all_finite(a.iter().chain(b.iter())) {
        return Err(Error::NonFinite("convergence model"));
    }
    Ok(ConvergenceModel {
        a,
        b,
        mu_mean,
        nu_mean,
        sigma_w2,
        rank: d,
        input_dim: m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    /// Spectral radius of `A`.
    pub rho: f64,
    /// `rho < 1`.
    pub stable_mean: bool,
    /// Largest eigenvalue of `A^H A` below one, i.e. `‖A‖₂ < 1`.
    pub stable_msd: bool,
    pub norm2: f64,
}

pub fn stability_check(model: &ConvergenceModel) -> Result<Stability> {
    let rho = spectral_radius(&model.a)?;
    let norm2 = model
        .a
        .clone()
        .singular_values()
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s));
    Ok(Stability {
        rho,
        stable_mean: rho < 1.0,
        stable_msd: norm2 < 1.0,
        norm2,
    })
}

/// Smallest factor `c` for which scaling both mean step sizes by `c`
/// makes `ρ(A) ≥ 1`, by bisection to relative precision `1e-9`.
///
/// `σ_w²` is held at its pilot value. Fails with
/// [`Error::NoConvergence`] when no factor up to `2^60` destabilizes the
/// model, and returns 0 when every factor down to `2^-60` is marginal.
pub fn stability_threshold(
    stats: &SecondOrderStats,
    opt: &OptimalPair,
    s_current: &ProjectionMatrix,
    base: StepStatistics,
) -> Result<f64> {
    let rho = |c: f64| -> Result<f64> {
        let model = build_model(
            stats,
            opt,
            s_current,
            c * base.mu_mean,
            c * base.nu_mean,
            base.sigma_w2,
        )?;
        Ok(stability_check(&model)?.rho)
    };
    // ρ(0) = 1 trivially, so bracket from 1 outward instead of from 0.
    let (mut lo, mut hi) = (0.0, 1.0);
    if rho(1.0)? >= 1.0 {
        let mut c = 1.0;
        loop {
            c *= 0.5;
            if c < 2f64.powi(-60) {
                return Ok(0.0);
            }
            if rho(c)? < 1.0 {
                lo = c;
                hi = 2.0 * c;
                break;
            }
        }
    } else {
        let mut doublings = 0;
        while rho(hi)? < 1.0 {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 60 {
                return Err(Error::NoConvergence);
            }
        }
    }
    while (hi - lo) > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if rho(mid)? >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Draws `(r, d)` pairs, circular complex Gaussian, with covariance `R`,
/// cross-correlation `p` and `E|d|² = σ_d²`.
///
/// `r = F z` with `F F^H = R`, and `d = w_o^H r + √J v` with `w_o = R⁻¹p`
/// and `J` the full-rank MMSE.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    factor: CMatrix,
    w_o: CVector,
    residual_std: f64,
}

impl GaussianSource {
    pub fn new(stats: &SecondOrderStats) -> Result<Self> {
        let eig = stats.r.as_matrix().clone().symmetric_eigen();
        let m = stats.dim();
        let mut factor = eig.eigenvectors.clone();
        for k in 0..m {
            let l = eig.eigenvalues[k].max(0.0).sqrt();
            factor.column_mut(k).scale_mut(l);
        }
        let w_o = hermitian_solve(&stats.r, &stats.p)?;
        let j = (stats.sigma_d2 - stats.p.dotc(&w_o).re).max(0.0);
        Ok(GaussianSource {
            factor,
            w_o,
            residual_std: j.sqrt(),
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (CVector, Complex64) {
        let z = CVector::from_fn(self.dim(), |_, _| complex_normal(rng));
        let r = &self.factor * z;
        let d = self.w_o.dotc(&r) + complex_normal(rng) * self.residual_std;
        (r, d)
    }
}

/// Unit-variance circular complex Gaussian.
pub fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Sample estimates of `E[μ(i)]`, `E[ν(i)]` and `σ_w²` from one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStatistics {
    pub mu_mean: f64,
    pub nu_mean: f64,
    pub sigma_w2: f64,
}

/// Pilot symbols used to estimate the step statistics.
pub const PILOT_SYMBOLS: usize = 1000;

/// Runs JIO-NLMS on `n_symbols` Gaussian samples and averages the step
/// sizes and `‖w̄(i)‖²`. `ν(i)` is the projection step `η(i)`, averaged over
/// the updates that were not skipped.
///
/// The run starts at `start` when given (typically the optimum, so the
/// averages describe the neighbourhood the model linearizes about), and at
/// the filter's default initial state otherwise.
pub fn pilot_step_statistics(
    stats: &SecondOrderStats,
    cfg: &JioConfig,
    start: Option<&OptimalPair>,
    n_symbols: usize,
    seed: u64,
) -> Result<StepStatistics> {
    if n_symbols == 0 {
        return Err(Error::Config("pilot run needs at least one symbol".into()));
    }
    let src = GaussianSource::new(stats)?;
    let mut rng = run_rng(seed, u64::MAX);
    let mut filter = match start {
        Some(opt) => JioNlms::with_state(opt.s_opt.clone(), opt.w_opt.clone(), cfg.clone())?,
        None => JioNlms::new(stats.dim(), cfg.clone())?,
    };
    let (mut mu_sum, mut nu_sum, mut w_sum) = (0.0, 0.0, 0.0);
    let mut nu_count = 0usize;
    for _ in 0..n_symbols {
        let (r, d) = src.sample(&mut rng);
        filter.update(&r, d)?;
        let (mu, eta) = filter.last_steps();
        mu_sum += mu;
        if eta > 0.0 {
            nu_sum += eta;
            nu_count += 1;
        }
        w_sum += filter.w_bar().norm_squared();
    }
    let n = n_symbols as f64;
    Ok(StepStatistics {
        mu_mean: mu_sum / n,
        nu_mean: if nu_count > 0 { nu_sum / nu_count as f64 } else { 0.0 },
        sigma_w2: w_sum / n,
    })
}

/// Mean error norms across the runs that stayed bounded.
#[derive(Debug, Clone)]
pub struct ErrorTrace {
    /// `‖e_w̄(i)‖` averaged over completed runs; index 0 is the initial
    /// state and index `i` follows the `i`-th update.
    pub w_error: Vec<f64>,
    /// `min_T ‖S(i) T − S_opt‖_F` averaged over completed runs.
    pub s_error: Vec<f64>,
    pub completed_runs: usize,
    /// Runs stopped by the divergence guard, with the iteration it fired at.
    pub diverged: Vec<(u64, u64)>,
}

impl ErrorTrace {
    pub fn diverged_fraction(&self) -> f64 {
        let total = self.completed_runs + self.diverged.len();
        self.diverged.len() as f64 / total as f64
    }
}

/// Distance from `S` to `S_opt` after the best right transform:
/// `‖S S⁺ S_opt − S_opt‖_F`.
pub fn aligned_projection_error(s: &CMatrix, s_opt: &CMatrix) -> Result<f64> {
    let t = pinv_rank_limited(s, 1e-12)? * s_opt;
    Ok((s * t - s_opt).norm())
}

/// Runs JIO-NLMS on Gaussian data with the given statistics and averages
/// the error norms over the runs. Runs start from `start`, or from the
/// filter's default initial state.
pub fn empirical_error_trace(
    stats: &SecondOrderStats,
    opt: &OptimalPair,
    cfg: &JioConfig,
    start: Option<&OptimalPair>,
    n_symbols: usize,
    n_runs: usize,
    seed: u64,
) -> Result<ErrorTrace> {
    if n_runs == 0 {
        return Err(Error::Config("need at least one run".into()));
    }
    if cfg.rank != opt.s_opt.rank() || stats.dim() != opt.s_opt.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "error trace rank",
            expected: opt.s_opt.rank(),
            actual: cfg.rank,
        });
    }
    let src = GaussianSource::new(stats)?;
    let s_opt = opt.s_opt.as_matrix();

    let runs: Vec<std::result::Result<Vec<(f64, f64)>, u64>> = (0..n_runs as u64)
        .into_par_iter()
        .map(|run| -> Result<std::result::Result<Vec<(f64, f64)>, u64>> {
            let mut rng = run_rng(seed, run);
            let mut filter = match start {
                Some(st) => JioNlms::with_state(st.s_opt.clone(), st.w_opt.clone(), cfg.clone())?,
                None => JioNlms::new(stats.dim(), cfg.clone())?,
            };
            let mut trace = Vec::with_capacity(n_symbols + 1);
            let record = |f: &JioNlms| -> Result<(f64, f64)> {
                Ok((
                    (f.w_bar() - &opt.w_opt).norm(),
                    aligned_projection_error(f.projection(), s_opt)?,
                ))
            };
            trace.push(record(&filter)?);
            for _ in 0..n_symbols {
                let (r, d) = src.sample(&mut rng);
                match filter.update(&r, d) {
                    Ok(_) => trace.push(record(&filter)?),
                    Err(Error::Divergence { iteration }) => return Ok(Err(iteration)),
                    Err(e) => return Err(e),
                }
            }
            Ok(Ok(trace))
        })
        .collect::<Result<_>>()?;

    let mut w_error = vec![0.0; n_symbols + 1];
    let mut s_error = vec![0.0; n_symbols + 1];
    let mut completed = 0usize;
    let mut diverged = Vec::new();
    for (run, outcome) in runs.into_iter().enumerate() {
        match outcome {
            Ok(trace) => {
                completed += 1;
                for (i, (we, se)) in trace.into_iter().enumerate() {
                    w_error[i] += we;
                    s_error[i] += se;
                }
            }
            Err(at) => diverged.push((run as u64, at)),
        }
    }
    if completed > 0 {
        let c = completed as f64;
        w_error.iter_mut().for_each(|v| *v /= c);
        s_error.iter_mut().for_each(|v| *v /= c);
    } else {
        w_error.clear();
        s_error.clear();
    }
    if !diverged.is_empty() {
        log::info!("{} of {} runs diverged", diverged.len(), n_runs);
    }
    Ok(ErrorTrace {
        w_error,
        s_error,
        completed_runs: completed,
        diverged,
    })
}

/// A single unit-power signature in white noise: `R = σ² I + u u^H`,
/// `p = u`, `σ_d² = 1`, with a fixed, deterministic complex `u`.
pub fn signal_in_noise_stats(m: usize, noise_var: f64) -> Result<SecondOrderStats> {
    if m == 0 || !(noise_var > 0.0) {
        return Err(Error::Config("need m >= 1 and a positive noise variance".into()));
    }
    let u = CVector::from_fn(m, |i, _| Complex64::new(((i + 1) as f64).sqrt(), 0.3 * i as f64)).normalize();
    let r = CMatrix::identity(m, m).scale(noise_var) + &u * u.adjoint();
    SecondOrderStats::new(HermitianMatrix::new(r)?, u, 1.0)
}

/// One point of a divergence scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergencePoint {
    /// Factor applied to both `μ₀` and `η₀`.
    pub factor: f64,
    pub diverged_fraction: f64,
}

/// Scales `μ₀` and `η₀` by each factor, runs `n_runs` Monte Carlo runs
/// from `start` and reports the share that trip the divergence guard.
pub fn divergence_scan(
    stats: &SecondOrderStats,
    opt: &OptimalPair,
    base: &JioConfig,
    start: Option<&OptimalPair>,
    factors: &[f64],
    n_symbols: usize,
    n_runs: usize,
    seed: u64,
) -> Result<Vec<DivergencePoint>> {
    factors
        .iter()
        .map(|&c| {
            let cfg = JioConfig {
                mu0: base.mu0 * c,
                eta0: base.eta0 * c,
                ..*base
            };
            let trace = empirical_error_trace(stats, opt, &cfg, start, n_symbols, n_runs, seed)?;
            Ok(DivergencePoint {
                factor: c,
                diverged_fraction: trace.diverged_fraction(),
            })
        })
        .collect()
}

/// Smallest scanned factor at which more than half of the runs diverge.
pub fn divergence_onset(scan: &[DivergencePoint]) -> Option<f64> {
    scan.iter()
        .filter(|p| p.diverged_fraction > 0.5)
        .map(|p| p.factor)
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))))
}
