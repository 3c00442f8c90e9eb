//! Synchronous DS-CDMA uplink with multipath, ISI and power imbalance.
//!
//! The `M = N + L − 1` chip-rate samples observed for symbol `i` are
//!
//! ```text
//! r(i) = Σ_k A_k H_k(i) C_k b_k(i) + n(i)
//! ```
//!
//! with `b_k(i) = [b_k(i+L_s−1) … b_k(i) … b_k(i−L_s+1)]^T`, `C_k` the block
//! diagonal of shifted signatures and `H_k(i)` the channel convolution
//! matrix. User 0 (the first user) is the desired user.

mod fading;
mod meters;

pub use fading::{clarke_fading, ClarkeProcess, OSCILLATORS};
pub use meters::{ber_estimate, sinr_db, WindowedBer, BER_WINDOW};

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adaptive::SymbolSample;
use crate::error::{Error, Result};
use crate::mmse::SecondOrderStats;
use crate::numerics::{CMatrix, CVector, HermitianMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingKind {
    #[default]
    Static,
    Clarke,
}

/// System parameters. Defaults are a desk-scale setup: 6 users, 16 chips,
/// 15 dB, one symbol of ISI on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of users `K`; user 0 is the desired one.
    pub users: usize,
    /// Chips per symbol `N`.
    pub chips: usize,
    /// Channel length upper bound `L`; taps beyond the realized delays are zero.
    pub channel_length: usize,
    pub n_paths: usize,
    pub path_powers_db: Vec<f64>,
    /// Path spacing is uniform on `spacing_min..=spacing_max` chips.
    pub spacing_min: usize,
    pub spacing_max: usize,
    /// ISI span `L_s`.
    pub isi_span: usize,
    /// Desired-user symbol SNR `A_1² ‖h_1‖² / σ²` in dB; `inf` disables noise.
    pub snr_db: f64,
    /// Standard deviation of the log-normal user powers in dB.
    pub power_std_db: f64,
    pub fading: FadingKind,
    /// Normalized Doppler `f_d T` (Clarke fading only).
    pub fd_t: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            users: 6,
            chips: 16,
            channel_length: 9,
            n_paths: 3,
            path_powers_db: vec![0.0, -3.0, -6.0],
            spacing_min: 1,
            spacing_max: 2,
            isi_span: 2,
            snr_db: 15.0,
            power_std_db: 1.5,
            fading: FadingKind::Static,
            fd_t: 0.001,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// Observation length `M = N + L − 1`.
    pub fn observation_len(&self) -> usize {
        self.chips + self.channel_length - 1
    }

    /// Symbols per stacked ISI vector, `2L_s − 1`.
    pub fn stacked_symbols(&self) -> usize {
        2 * self.isi_span - 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.users == 0 {
            return fail("at least one user is required".into());
        }
        if self.chips < 2 {
            return fail(format!("processing gain must be at least 2, got {}", self.chips));
        }
        if self.n_paths == 0 || self.path_powers_db.len() != self.n_paths {
            return fail(format!(
                "need one power per path ({} paths, {} powers)",
                self.n_paths,
                self.path_powers_db.len()
            ));
        }
        if self.spacing_min > self.spacing_max {
            return fail("spacing_min exceeds spacing_max".into());
        }
        let max_delay = (self.n_paths - 1) * self.spacing_max;
        if max_delay >= self.channel_length {
            return fail(format!(
                "{} paths spaced up to {} chips do not fit in {} taps",
                self.n_paths, self.spacing_max, self.channel_length
            ));
        }
        if self.channel_length > self.chips + 1 {
            return fail("channel longer than one symbol plus one chip needs a wider ISI span".into());
        }
        if self.isi_span < 1 {
            return fail("ISI span must be at least 1".into());
        }
        if self.isi_span == 1 && self.channel_length > 1 {
            return fail("multipath spills into neighbouring symbols; use isi_span ≥ 2".into());
        }
        if self.snr_db.is_nan() || !self.power_std_db.is_finite() || self.power_std_db < 0.0 {
            return fail("SNR and power spread must be valid numbers".into());
        }
        if self.fading == FadingKind::Clarke && !(self.fd_t >= 0.0 && self.fd_t.is_finite()) {
            return fail(format!("fd_t must be non-negative, got {}", self.fd_t));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ChannelState {
    Static(Vec<CVector>),
    Clarke(Vec<Vec<ClarkeProcess>>),
}

/// One sampled system: codes, channels, powers and symbol streams.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRealization {
    config: ScenarioConfig,
    n_symbols: usize,
    signatures: Vec<Vec<f64>>,
    amplitudes: Vec<f64>,
    noise_var: f64,
    delays: Vec<Vec<usize>>,
    /// `sqrt` of the unit-sum path powers.
    path_scale: Vec<f64>,
    channels: ChannelState,
    /// `symbols[k][i + L_s − 1]` is `b_k(i)`.
    symbols: Vec<Vec<i8>>,
    noise_seed: u64,
    /// `A_k H_k C_k` for static channels.
    cached_columns: Option<Vec<CMatrix>>,
}

/// Draws a realization for `n_symbols` symbols. Deterministic in
/// `config.seed`.
pub fn generate(config: &ScenarioConfig, n_symbols: usize) -> Result<ScenarioRealization> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.chips;
    let k_users = config.users;
    let amp = 1.0 / (n as f64).sqrt();

    let signatures: Vec<Vec<f64>> = (0..k_users)
        .map(|_| (0..n).map(|_| if rng.random::<bool>() { amp } else { -amp }).collect())
        .collect();

    let delays: Vec<Vec<usize>> = (0..k_users)
        .map(|_| {
            let mut at = 0;
            (0..config.n_paths)
                .map(|l| {
                    if l > 0 {
                        at += rng.random_range(config.spacing_min..=config.spacing_max);
                    }
                    at
                })
                .collect()
        })
        .collect();

    let powers: Vec<f64> = config.path_powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let total: f64 = powers.iter().sum();
    let path_scale: Vec<f64> = powers.iter().map(|p| (p / total).sqrt()).collect();

    let channels = match config.fading {
        FadingKind::Static => ChannelState::Static(
            (0..k_users)
                .map(|k| {
                    let mut h = CVector::zeros(config.channel_length);
                    for (l, &tap) in delays[k].iter().enumerate() {
                        let g = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                        h[tap] += g * path_scale[l];
                    }
                    let norm = h.norm();
                    h.unscale(norm)
                })
                .collect(),
        ),
        FadingKind::Clarke => ChannelState::Clarke(
            (0..k_users)
                .map(|_| {
                    (0..config.n_paths)
                        .map(|_| ClarkeProcess::new(config.fd_t, &mut rng))
                        .collect()
                })
                .collect(),
        ),
    };

    let amplitudes: Vec<f64> = (0..k_users)
        .map(|_| {
            let db: f64 = rng.sample::<f64, _>(StandardNormal) * config.power_std_db;
            10f64.powf(db / 20.0)
        })
        .collect();
    let noise_var = if config.snr_db == f64::INFINITY {
        0.0
    } else {
        amplitudes[0].powi(2) / 10f64.powf(config.snr_db / 10.0)
    };

    let pad = config.isi_span - 1;
    let symbols: Vec<Vec<i8>> = (0..k_users)
        .map(|_| {
            (0..n_symbols + 2 * pad)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect()
        })
        .collect();
    let noise_seed = rng.random::<u64>();

    let mut real = ScenarioRealization {
        config: config.clone(),
        n_symbols,
        signatures,
        amplitudes,
        noise_var,
        delays,
        path_scale,
        channels,
        symbols,
        noise_seed,
        cached_columns: None,
    };
    if config.fading == FadingKind::Static {
        let cols = (0..k_users).map(|k| real.signal_columns_uncached(k, 0)).collect();
        real.cached_columns = Some(cols);
    }
    Ok(real)
}

impl ScenarioRealization {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn observation_len(&self) -> usize {
        self.config.observation_len()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Signature of user `k`, entries `±1/√N`.
    pub fn signature(&self, k: usize) -> &[f64] {
        &self.signatures[k]
    }

    pub fn path_delays(&self, k: usize) -> &[usize] {
        &self.delays[k]
    }

    /// `b_k(i)`; `i` may reach `L_s − 1` symbols outside `0..n_symbols`.
    pub fn symbol(&self, k: usize, i: isize) -> f64 {
        let pad = (self.config.isi_span - 1) as isize;
        self.symbols[k][(i + pad) as usize] as f64
    }

    /// Zero-padded channel vector `h_k(i)` of length `L`.
    pub fn channel(&self, k: usize, i: usize) -> CVector {
        match &self.channels {
            ChannelState::Static(h) => h[k].clone(),
            ChannelState::Clarke(procs) => {
                let mut h = CVector::zeros(self.config.channel_length);
                for (l, p) in procs[k].iter().enumerate() {
                    h[self.delays[k][l]] += p.gain(i) * self.path_scale[l];
                }
                h
            }
        }
    }

    /// Block-diagonal code matrix `C_k`, `((2L_s−1)N) × (2L_s−1)`.
    pub fn code_matrix(&self, k: usize) -> CMatrix {
        let n = self.config.chips;
        let blocks = self.config.stacked_symbols();
        let mut c = CMatrix::zeros(blocks * n, blocks);
        for j in 0..blocks {
            for (chip, &a) in self.signatures[k].iter().enumerate() {
                c[(j * n + chip, j)] = Complex64::new(a, 0.0);
            }
        }
        c
    }

    /// Convolution matrix `H_k(i)`, `M × (2L_s−1)N`.
    ///
    /// Column `jN + c` carries chip `c` of the symbol `L_s − 1 − j` positions
    /// after symbol `i`; its entries are the channel taps shifted to that
    /// chip's arrival time, truncated to the observation window.
    pub fn convolution_matrix(&self, k: usize, i: usize) -> CMatrix {
        let n = self.config.chips as isize;
        let m = self.observation_len();
        let blocks = self.config.stacked_symbols();
        let ls = self.config.isi_span as isize;
        let h = self.channel(k, i);
        let mut out = CMatrix::zeros(m, blocks * n as usize);
        for j in 0..blocks {
            for c in 0..n {
                let arrival = (ls - 1 - j as isize) * n + c;
                let col = j * n as usize + c as usize;
                for (l, tap) in h.iter().enumerate() {
                    let row = arrival + l as isize;
                    if (0..m as isize).contains(&row) {
                        out[(row as usize, col)] = *tap;
                    }
                }
            }
        }
        out
    }

    /// `A_k H_k(i) C_k` without forming the sparse factors: column `j` is
    /// the channel convolved with the signature, shifted to that symbol's
    /// arrival and truncated to the window.
    fn signal_columns_uncached(&self, k: usize, i: usize) -> CMatrix {
        let n = self.config.chips as isize;
        let m = self.observation_len() as isize;
        let ls = self.config.isi_span as isize;
        let h = self.channel(k, i);
        let amp = self.amplitudes[k];
        let mut out = CMatrix::zeros(m as usize, self.config.stacked_symbols());
        for j in 0..out.ncols() {
            let start = (ls - 1 - j as isize) * n;
            for (c, &a) in self.signatures[k].iter().enumerate() {
                for (l, tap) in h.iter().enumerate() {
                    let row = start + c as isize + l as isize;
                    if (0..m).contains(&row) {
                        out[(row as usize, j)] += tap * (a * amp);
                    }
                }
            }
        }
        out
    }

    /// `A_k H_k(i) C_k`: column `j` is user `k`'s contribution per unit of
    /// the `j`-th stacked symbol.
    pub fn signal_columns(&self, k: usize, i: usize) -> CMatrix {
        match &self.cached_columns {
            Some(cols) => cols[k].clone(),
            None => self.signal_columns_uncached(k, i),
        }
    }

    /// The contribution of user `k` to `r(i)`, noise excluded.
    pub fn user_contribution(&self, k: usize, i: usize) -> CVector {
        let cols = match &self.cached_columns {
            Some(c) => std::borrow::Cow::Borrowed(&c[k]),
            None => std::borrow::Cow::Owned(self.signal_columns_uncached(k, i)),
        };
        let ls = self.config.isi_span as isize;
        let b = CVector::from_fn(cols.ncols(), |j, _| {
            Complex64::new(self.symbol(k, i as isize + ls - 1 - j as isize), 0.0)
        });
        cols.as_ref() * b
    }

    /// Noise vector `n(i)`; each index has its own random stream.
    pub fn noise(&self, i: usize) -> CVector {
        let m = self.observation_len();
        if self.noise_var == 0.0 {
            return CVector::zeros(m);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        rng.set_stream(i as u64);
        let s = (self.noise_var / 2.0).sqrt();
        CVector::from_fn(m, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
    }

    /// `r(i)` with `d(i) = b_1(i)`.
    pub fn received_vector(&self, i: usize) -> Result<SymbolSample> {
        if i >= self.n_symbols {
            return Err(Error::OutOfRange {
                index: i,
                horizon: self.n_symbols,
            });
        }
        let mut r = self.noise(i);
        for k in 0..self.config.users {
            r += self.user_contribution(k, i);
        }
        Ok(SymbolSample {
            r,
            d: Complex64::new(self.symbol(0, i as isize), 0.0),
        })
    }

    /// All samples in order.
    pub fn samples(&self) -> impl Iterator<Item = SymbolSample> + '_ {
        (0..self.n_symbols).map(move |i| self.received_vector(i).expect("index within horizon"))
    }

    /// Writes a CSV dump of codes, channels, powers and symbols.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        self.write_csv(&mut out).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "section,user,index,re,im")?;
        writeln!(w, "noise_var,,,{:e},0", self.noise_var)?;
        for k in 0..self.config.users {
            writeln!(w, "amplitude,{k},,{:e},0", self.amplitudes[k])?;
            for (c, a) in self.signatures[k].iter().enumerate() {
                writeln!(w, "signature,{k},{c},{a:e},0")?;
            }
            for (l, tap) in self.channel(k, 0).iter().enumerate() {
                writeln!(w, "channel0,{k},{l},{:e},{:e}", tap.re, tap.im)?;
            }
            for i in 0..self.n_symbols {
                writeln!(w, "symbol,{k},{i},{},0", self.symbol(k, i as isize))?;
            }
        }
        Ok(())
    }
}

/// Closed-form second-order statistics of a realization at one channel
/// snapshot, with the desired/interference split used by the SINR meter.
#[derive(Debug, Clone)]
pub struct ExactStats {
    pub stats: SecondOrderStats,
    /// Desired-symbol signature `A_1 H_1 C_1 e_c` (equals `p`).
    pub signal: CVector,
    /// Interference-plus-noise covariance `R − signal·signal^H`.
    pub interference: HermitianMatrix,
}

/// `R = Σ_k A_k² H_k C_k C_k^H H_k^H + σ² I`, `p = A_1 H_1 C_1 e_c`,
/// `σ_d² = 1` for independent equiprobable BPSK symbols.
///
/// Time-varying channels need a snapshot index.
pub fn exact_stats(real: &ScenarioRealization, at_symbol: Option<usize>) -> Result<ExactStats> {
    let i = match (real.config.fading, at_symbol) {
        (FadingKind::Static, at) => at.unwrap_or(0),
        (FadingKind::Clarke, Some(i)) => i,
        (FadingKind::Clarke, None) => {
            return Err(Error::Config("time-varying channel statistics need a snapshot index".into()))
        }
    };
    let m = real.observation_len();
    let center = real.config.isi_span - 1;
    let mut r = CMatrix::identity(m, m).scale(real.noise_var);
    let mut signal = CVector::zeros(m);
    for k in 0..real.config.users {
        let g = real.signal_columns(k, i);
        r += &g * g.adjoint();
        if k == 0 {
            signal = g.column(center).into_owned();
        }
    }
    let interference = HermitianMatrix::symmetrized(&r - &signal * signal.adjoint());
    let stats = SecondOrderStats {
        r: HermitianMatrix::symmetrized(r),
        p: signal.clone(),
        sigma_d2: 1.0,
    };
    Ok(ExactStats {
        stats,
        signal,
        interference,
    })
}
