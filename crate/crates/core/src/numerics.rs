//! Dense complex linear algebra shared by the filter designs.
//!
//! Everything is double precision. Matrices and vectors are plain nalgebra
//! containers; [`HermitianMatrix`] is the one wrapper with a checked invariant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative asymmetry tolerated by [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Relative ridge scale applied by [`hermitian_solve`] on near-singular inputs.
pub const RIDGE_SCALE: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Column vector from a slice of complex numbers.
pub fn cvec(entries: &[Complex64]) -> CVector {
    CVector::from_column_slice(entries)
}

/// Column vector from real entries.
pub fn cvec_re(entries: &[f64]) -> CVector {
    CVector::from_iterator(entries.len(), entries.iter().map(|&x| c64(x, 0.0)))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn all_finite<'a>(entries: impl IntoIterator<Item = &'a Complex64>) -> bool {
    entries.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Outer product `a b^H`.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// A square matrix known to equal its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Checks squareness, finiteness and `‖X − X^H‖_max ≤ 1e-10·‖X‖_max`,
    /// then stores the exactly symmetrized matrix.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if !all_finite(m.iter()) {
            return Err(Error::NonFinite("hermitian matrix"));
        }
        let scale = max_abs(&m);
        let asym = max_abs(&(&m - m.adjoint()));
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian {
                asymmetry: if scale > 0.0 { asym / scale } else { asym },
            });
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its conjugate transpose; no tolerance check.
    pub fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        HermitianMatrix((m + adj).scale(0.5))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(CMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace_re(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// Solves `A x = b` for Hermitian `A`.
///
/// When the smallest eigenvalue falls below `ε = 1e-10·trace(A)/dim(A)` the
/// system `(A + εI) x = b` is solved instead.
pub fn hermitian_solve(a: &HermitianMatrix, b: &CVector) -> Result<CVector> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "hermitian_solve",
            expected: n,
            actual: b.len(),
        });
    }
    let eig = a.as_matrix().clone().symmetric_eigen();
    let mut lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let ridge = RIDGE_SCALE * a.trace_re() / n as f64;
    let min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if min < ridge {
        lambdas.iter_mut().for_each(|l| *l += ridge.max(0.0));
    }
    let top = lambdas.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
    if top == 0.0 || lambdas.iter().any(|l| l.abs() <= f64::EPSILON * top) {
        return Err(Error::Singular);
    }
    let v = &eig.eigenvectors;
    let mut coeffs = v.adjoint() * b;
    for (c, l) in coeffs.iter_mut().zip(&lambdas) {
        *c /= *l;
    }
    Ok(v * coeffs)
}

/// All eigenvalues of a general square matrix (complex Schur form).
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    // Highly non-normal matrices with repeated eigenvalues can stall the QR
    // sweeps at machine precision; retry with looser deflation thresholds.
    for eps in [f64::EPSILON, 1e-14, 1e-13, 1e-12] {
        if let Some(ev) = nalgebra::Schur::try_new(a.clone(), eps, 100_000).and_then(|s| s.eigenvalues()) {
            return Ok(ev.iter().copied().collect());
        }
    }
    Err(Error::NoConvergence)
}

/// `max |λ_i(A)|`.
pub fn spectral_radius(a: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().fold(0.0, |acc, z| acc.max(z.norm())))
}

/// Moore–Penrose pseudo-inverse, treating singular values below
/// `tol·σ_max` as zero.
pub fn pinv_rank_limited(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("pinv tolerance must be positive, got {tol}")));
    }
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(CMatrix::zeros(cols, rows));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or(Error::NoConvergence)?;
    let v_t = svd.v_t.as_ref().ok_or(Error::NoConvergence)?;
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = tol * sigma_max;
    let mut out = CMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 0.0 && s >= cutoff {
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k);
            out += (vk * uk.adjoint()).unscale(s);
        }
    }
    Ok(out)
}

/// Orthonormal basis produced by [`orthonormalize_columns`].
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub q: CMatrix,
    /// Input column indices that contributed a basis vector, in order.
    pub kept: Vec<usize>,
    /// Input column indices whose residual fell below tolerance.
    pub dropped: Vec<usize>,
}

/// Gram–Schmidt with one full reorthogonalization pass.
///
/// Column `j` is dropped when its residual after projection is at most
/// `tol·‖a_j‖` (zero columns are always dropped).
pub fn orthonormalize_columns(a: &CMatrix, tol: f64) -> Result<Orthonormalized> {
    let mut basis: Vec<CVector> = Vec::with_capacity(a.ncols());
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..a.ncols() {
        let col: CVector = a.column(j).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let coef = q.dotc(&v);
                v.axpy(-coef, q, Complex64::new(1.0, 0.0));
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= tol * norm0 {
            dropped.push(j);
        } else {
            basis.push(v.unscale(norm));
            kept.push(j);
        }
    }
    if basis.is_empty() {
        return Err(Error::AllColumnsDegenerate);
    }
    Ok(Orthonormalized {
        q: CMatrix::from_columns(&basis),
        kept,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(rows, cols, |_, _| c64(next(), next()))
    }

    fn random_psd(n: usize, seed: u64) -> HermitianMatrix {
        let g = lcg_matrix(n, n, seed);
        HermitianMatrix::symmetrized(&g * g.adjoint() + CMatrix::identity(n, n).scale(0.1))
    }

    // Plain Gaussian elimination with partial pivoting; independent of the
    // eigen-based solver under test.
    fn gauss_solve(a: &CMatrix, b: &CVector) -> CVector {
        let n = a.nrows();
        let mut m = a.clone();
        let mut x = b.clone();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[(i, k)].norm().total_cmp(&m[(j, k)].norm())).unwrap();
            m.swap_rows(k, p);
            x.swap_rows(k, p);
            for i in k + 1..n {
                let f = m[(i, k)] / m[(k, k)];
                for j in k..n {
                    let t = m[(k, j)];
                    m[(i, j)] -= f * t;
                }
                let t = x[k];
                x[i] -= f * t;
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in k + 1..n {
                acc -= m[(k, j)] * x[j];
            }
            x[k] = acc / m[(k, k)];
        }
        x
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = cvec(&[c64(1.0, 0.0), I]);
        let x = hermitian_solve(&HermitianMatrix::identity(2), &b).unwrap();
        assert!((x - &b).norm() < 1e-14);

        let a = HermitianMatrix::new(CMatrix::from_diagonal(&cvec_re(&[2.0, 4.0]))).unwrap();
        let x = hermitian_solve(&a, &cvec_re(&[2.0, 4.0])).unwrap();
        assert!((x - cvec_re(&[1.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn solve_matches_elimination_oracle() {
        let a = random_psd(6, 7);
        let b: CVector = lcg_matrix(6, 1, 99).column(0).into_owned();
        let x = hermitian_solve(&a, &b).unwrap();
        let oracle = gauss_solve(a.as_matrix(), &b);
        assert!((&x - &oracle).norm() <= 1e-9 * oracle.norm());
        assert!((a.as_matrix() * &x - &b).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let a = HermitianMatrix::identity(3);
        assert!(matches!(
            hermitian_solve(&a, &cvec_re(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian { .. })));
        assert!(matches!(
            HermitianMatrix::new(CMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let zero = HermitianMatrix::symmetrized(CMatrix::zeros(2, 2));
        assert!(matches!(hermitian_solve(&zero, &cvec_re(&[1.0, 0.0])), Err(Error::Singular)));
    }

    #[test]
    fn ridge_applies_to_rank_deficient_covariance() {
        // Rank-1 PSD: A = v v^H. b in range(A).
        let v = cvec(&[c64(1.0, 0.5), c64(-0.3, 0.2), c64(0.0, 1.0)]);
        let a = HermitianMatrix::symmetrized(outer(&v, &v));
        let b = v.scale(2.0);
        let x = hermitian_solve(&a, &b).unwrap();
        let ridge = RIDGE_SCALE * a.trace_re() / 3.0;
        let lhs = a.as_matrix() * &x + x.scale(ridge);
        assert!((lhs - &b).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn spectral_radius_examples() {
        let d = CMatrix::from_diagonal(&cvec_re(&[0.5, 0.2]));
        assert!((spectral_radius(&d).unwrap() - 0.5).abs() < 1e-12);
        let rot = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(-1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        assert!((spectral_radius(&rot).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(spectral_radius(&CMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn pinv_examples() {
        let i3 = CMatrix::identity(3, 3);
        assert!((pinv_rank_limited(&i3, 1e-12).unwrap() - &i3).norm() < 1e-12);
        let w = cvec_re(&[1.0, 1.0]).unscale(2f64.sqrt());
        let proj = outer(&w, &w);
        assert!((pinv_rank_limited(&proj, 1e-12).unwrap() - &proj).norm() < 1e-12);
        assert!(pinv_rank_limited(&proj, 0.0).is_err());
    }

    #[test]
    fn orthonormalize_examples() {
        let e1 = cvec_re(&[1.0, 0.0]);
        let a = CMatrix::from_columns(&[e1.clone(), e1.scale(2.0)]);
        let out = orthonormalize_columns(&a, 1e-10).unwrap();
        assert_eq!(out.q.ncols(), 1);
        assert_eq!(out.dropped, vec![1]);
        assert!((out.q.column(0) - &e1).norm() < 1e-15);

        let i2 = CMatrix::identity(2, 2);
        let out = orthonormalize_columns(&i2, 1e-10).unwrap();
        assert!((out.q - i2).norm() < 1e-15);
        assert!(out.dropped.is_empty());

        assert!(matches!(
            orthonormalize_columns(&CMatrix::zeros(3, 2), 1e-10),
            Err(Error::AllColumnsDegenerate)
        ));
    }
}
