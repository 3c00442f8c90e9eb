//! Shared generators and independent reference computations for the
//! integration suites.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rrjio::mmse::SecondOrderStats;
use rrjio::numerics::{CMatrix, CVector, HermitianMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Box–Muller, unit variance complex normal. Kept separate from the
/// library's sampler so test data does not share its code path.
pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    Complex64::new(r * t.cos(), r * t.sin())
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| cn(rng))
}

/// `G G^H / m + floor·I`.
pub fn random_pd<R: Rng>(rng: &mut R, m: usize, floor: f64) -> CMatrix {
    let g = random_matrix(rng, m, m);
    (&g * g.adjoint()).unscale(m as f64) + CMatrix::identity(m, m).scale(floor)
}

/// Random statistics with `σ_d²` one above the explained power, so the
/// full-rank MMSE is exactly 1.
pub fn random_stats<R: Rng>(rng: &mut R, m: usize) -> SecondOrderStats {
    let r = random_pd(rng, m, 0.1);
    let p = random_vector(rng, m);
    let w = gauss_solve(&r, &p);
    let explained = p.dotc(&w).re;
    SecondOrderStats::new(HermitianMatrix::symmetrized(r), p, explained + 1.0).unwrap()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &CMatrix, b: &CVector) -> CVector {
    let n = a.nrows();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).chain(std::iter::once(b[i])).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm())).unwrap();
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                let v = m[col][k];
                m[row][k] -= f * v;
            }
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for k in i + 1..n {
            s -= m[i][k] * x[k];
        }
        x[i] = s / m[i][i];
    }
    CVector::from_vec(x)
}

/// Full-rank MMSE `σ_d² − p^H R⁻¹ p` by elimination.
pub fn mmse_oracle(stats: &SecondOrderStats) -> f64 {
    let w = gauss_solve(stats.r.as_matrix(), &stats.p);
    stats.sigma_d2 - stats.p.dotc(&w).re
}

/// Reduced MMSE through `S` by elimination on `S^H R S`; `S` must have
/// full column rank.
pub fn reduced_mmse_oracle(stats: &SecondOrderStats, s: &CMatrix) -> f64 {
    let rb = s.adjoint() * stats.r.as_matrix() * s;
    let pb = s.adjoint() * &stats.p;
    let w = gauss_solve(&rb, &pb);
    stats.sigma_d2 - pb.dotc(&w).re
}

/// Mann–Kendall trend statistic `Z`; negative for a decreasing series.
pub fn mann_kendall_z(x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += (x[j] - x[i]).partial_cmp(&0.0).map_or(0, |o| o as i64);
        }
    }
    let nf = n as f64;
    let var = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
    match s.cmp(&0) {
        std::cmp::Ordering::Greater => (s as f64 - 1.0) / var.sqrt(),
        std::cmp::Ordering::Less => (s as f64 + 1.0) / var.sqrt(),
        std::cmp::Ordering::Equal => 0.0,
    }
}

/// `J₀(x)` by composite Simpson quadrature of `(1/π)∫₀^π cos(x sin θ) dθ`.
pub fn bessel_j0(x: f64) -> f64 {
    let n = 2000;
    let h = std::f64::consts::PI / n as f64;
    let f = |t: f64| (x * t.sin()).cos();
    let mut acc = f(0.0) + f(std::f64::consts::PI);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    acc * h / 3.0 / std::f64::consts::PI
}

/// Entrywise comparison of the sample covariance and cross-correlation of
/// `n` generated vectors against the exact statistics, with batch-means
/// standard errors (`batches` equal batches). Returns
/// `(exceedances beyond 3 SE, number of real comparisons)`.
pub fn covariance_exceedances(
    real: &rrjio::scenario::ScenarioRealization,
    ex: &rrjio::scenario::ExactStats,
    batches: usize,
) -> (usize, usize) {
    let m = real.observation_len();
    let n = real.n_symbols();
    let per = n / batches;
    let mut batch_r: Vec<CMatrix> = Vec::with_capacity(batches);
    let mut batch_p: Vec<CVector> = Vec::with_capacity(batches);
    for b in 0..batches {
        let mut r = CMatrix::zeros(m, m);
        let mut p = CVector::zeros(m);
        for i in b * per..(b + 1) * per {
            let s = real.received_vector(i).unwrap();
            r.ger(Complex64::new(1.0, 0.0), &s.r, &s.r.conjugate(), Complex64::new(1.0, 0.0));
            p += &s.r * s.d.conj();
        }
        batch_r.push(r.unscale(per as f64));
        batch_p.push(p.unscale(per as f64));
    }
    let nb = batches as f64;
    let mut exceed = 0;
    let mut tests = 0;
    let mut check = |values: Vec<f64>, truth: f64| {
        let mean = values.iter().sum::<f64>() / nb;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        let se = (var / nb).sqrt();
        tests += 1;
        if (mean - truth).abs() > 3.0 * se {
            exceed += 1;
        }
    };
    let exact_r = ex.stats.r.as_matrix();
    for i in 0..m {
        for j in i..m {
            check(batch_r.iter().map(|r| r[(i, j)].re).collect(), exact_r[(i, j)].re);
            if i != j {
                check(batch_r.iter().map(|r| r[(i, j)].im).collect(), exact_r[(i, j)].im);
            }
        }
        check(batch_p.iter().map(|p| p[i].re).collect(), ex.stats.p[i].re);
        check(batch_p.iter().map(|p| p[i].im).collect(), ex.stats.p[i].im);
    }
    (exceed, tests)
}

/// Upper `q` quantile of Binomial(n, p).
pub fn binomial_quantile(n: usize, p: f64, q: f64) -> usize {
    let mut cdf = 0.0;
    let mut pmf = (1.0 - p).powi(n as i32);
    for k in 0..=n {
        cdf += pmf;
        if cdf >= q {
            return k;
        }
        pmf *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
    }
    n
}

/// Two-sided `P(|Z| > 3)` for a standard normal.
pub const THREE_SIGMA_TAIL: f64 = 0.002_699_796_063_260_2;

/// Largest deviation of the ensemble autocorrelation of Clarke gains from
/// `J₀(2π f_d T ℓ)` over `0..=max_lag`, from `processes` independent
/// generators observed for `len` symbols each.
pub fn clarke_autocorrelation_error(fd_t: f64, max_lag: usize, processes: usize, len: usize, seed: u64) -> f64 {
    let paths = rrjio::scenario::clarke_fading(fd_t, processes, len + max_lag, seed);
    let mut acf = vec![Complex64::new(0.0, 0.0); max_lag + 1];
    for h in &paths {
        for (lag, slot) in acf.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for t in 0..len {
                s += h[t + lag] * h[t].conj();
            }
            *slot += s;
        }
    }
    let r0 = acf[0].re;
    acf.iter()
        .enumerate()
        .map(|(lag, a)| {
            let oracle = bessel_j0(std::f64::consts::TAU * fd_t * lag as f64);
            (a / r0 - oracle).norm()
        })
        .fold(0.0, f64::max)
}
