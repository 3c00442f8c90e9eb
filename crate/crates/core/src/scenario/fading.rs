//! Clarke-model Rayleigh fading by a sum of sinusoids.
//!
//! Each path is an independent generator with [`OSCILLATORS`] terms
//!
//! ```text
//! g(i) = Σ_n c_n exp(j(2π f_d T cos α_n · i + φ_n)),   c_n ~ CN(0, 1/N)
//! ```
//!
//! with uniform arrival angles `α_n` and phases `φ_n`. Across realizations
//! `g(i)` is unit-power circular Gaussian and
//! `E[g(i) g*(i+ℓ)] = J₀(2π f_d T ℓ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const OSCILLATORS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ClarkeProcess {
    weights: Vec<Complex64>,
    /// Angular Doppler frequency per oscillator, radians per symbol.
    omegas: Vec<f64>,
    phases: Vec<f64>,
}

impl ClarkeProcess {
    pub fn new<R: Rng + ?Sized>(fd_t: f64, rng: &mut R) -> Self {
        let scale = (0.5 / OSCILLATORS as f64).sqrt();
        let mut weights = Vec::with_capacity(OSCILLATORS);
        let mut omegas = Vec::with_capacity(OSCILLATORS);
        let mut phases = Vec::with_capacity(OSCILLATORS);
        for _ in 0..OSCILLATORS {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            weights.push(Complex64::new(re * scale, im * scale));
            let alpha = rng.random::<f64>() * 2.0 * PI;
            omegas.push(2.0 * PI * fd_t * alpha.cos());
            phases.push(rng.random::<f64>() * 2.0 * PI);
        }
        ClarkeProcess { weights, omegas, phases }
    }

    /// Complex gain at symbol index `i`.
    pub fn gain(&self, i: usize) -> Complex64 {
        let t = i as f64;
        self.weights
            .iter()
            .zip(&self.omegas)
            .zip(&self.phases)
            .map(|((c, w), ph)| c * Complex64::from_polar(1.0, w * t + ph))
            .sum()
    }
}

/// Per-path gain series of length `n_symbols` from independent generators.
pub fn clarke_fading(fd_t: f64, n_paths: usize, n_symbols: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_paths)
        .map(|_| {
            let proc_ = ClarkeProcess::new(fd_t, &mut rng);
            (0..n_symbols).map(|i| proc_.gain(i)).collect()
        })
        .collect()
}
