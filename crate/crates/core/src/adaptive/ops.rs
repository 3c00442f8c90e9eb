//! Arithmetic tallies for per-update operation counts.
//!
//! Counting convention: one complex addition or subtraction is one
//! addition; one complex (or real-by-complex) multiplication or division is
//! one multiplication. Conjugation is free. The denominator guard `ε` added
//! to normalizations is not counted, and neither are comparisons or the
//! divergence guard.

use num_complex::Complex64;

use crate::numerics::{CMatrix, CVector};

pub trait Tally {
    fn add(&mut self, n: usize);
    fn mul(&mut self, n: usize);
}

/// Zero-cost tally used by the uninstrumented update paths.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCount;

impl Tally for NoCount {
    #[inline(always)]
    fn add(&mut self, _: usize) {}
    #[inline(always)]
    fn mul(&mut self, _: usize) {}
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    pub adds: u64,
    pub mults: u64,
}

impl Tally for OpCount {
    fn add(&mut self, n: usize) {
        self.adds += n as u64;
    }
    fn mul(&mut self, n: usize) {
        self.mults += n as u64;
    }
}

/// `a^H b`.
pub(crate) fn dotc<T: Tally>(a: &CVector, b: &CVector, t: &mut T) -> Complex64 {
    let n = a.len();
    t.mul(n);
    t.add(n.saturating_sub(1));
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `‖a‖²`.
pub(crate) fn norm_sq<T: Tally>(a: &CVector, t: &mut T) -> f64 {
    let n = a.len();
    t.mul(n);
    t.add(n.saturating_sub(1));
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// `S^H r`, one inner product per column.
pub(crate) fn adjoint_apply<T: Tally>(s: &CMatrix, r: &CVector, t: &mut T) -> CVector {
    let (m, d) = s.shape();
    t.mul(d * m);
    t.add(d * m.saturating_sub(1));
    s.ad_mul(r)
}

/// `y += a x`.
pub(crate) fn axpy<T: Tally>(y: &mut CVector, a: Complex64, x: &CVector, t: &mut T) {
    t.mul(x.len());
    t.add(x.len());
    y.axpy(a, x, Complex64::new(1.0, 0.0));
}
