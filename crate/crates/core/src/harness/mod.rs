//! Monte Carlo experiments on the DS-CDMA scenario: SINR versus rank,
//! SINR versus received symbols, BER versus received symbols, and the
//! per-update complexity table.
//!
//! Every run draws its own scenario realization from a seed derived from the
//! master seed and the run index, so runs execute in parallel and their
//! results are summed in run order.

mod complexity;
mod emit;
mod figures;
mod tuning;

pub use complexity::{complexity_table, count_verify, mwf_literal_rows, ComplexityRow, CountCheck, TableRow};
pub use emit::{emit, emit_curves, tidy_csv, Curve, EmittedFiles, CSV_HEADER};
pub use figures::{default_spec, run_figure, Figure, FigureRun};
pub use tuning::{tune, TuningObjective, TuningReport, MU_GRID, LAMBDA_GRID};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    run_decision_directed, AdaptiveFilter, JioConfig, JioNlms, KrylovNlms, KrylovNlmsConfig, NlmsFilter,
    RlsFilter, StepMode, SymbolSample,
};
use crate::error::{Error, Result};
use crate::mmse::full_rank_wiener;
use crate::scenario::{ber_estimate, exact_stats, generate, sinr_db, FadingKind, ScenarioConfig, BER_WINDOW};

/// Label of the exact MMSE reference series.
pub const BOUND_LABEL: &str = "mmse_bound";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    JioNlms {
        rank: usize,
        mu0: f64,
        eta0: f64,
        #[serde(default)]
        step_mode: StepMode,
    },
    FullRankNlms {
        mu0: f64,
    },
    FullRankRls {
        lambda: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Krylov-subspace projection from running statistics plus NLMS; stands
    /// in for the multistage Wiener filter.
    KrylovNlms {
        rank: usize,
        mu0: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_delta() -> f64 {
    1e-2
}

fn default_alpha() -> f64 {
    0.998
}

impl AlgorithmConfig {
    /// Series label.
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::JioNlms { .. } => "jio_nlms",
            AlgorithmConfig::FullRankNlms { .. } => "full_rank_nlms",
            AlgorithmConfig::FullRankRls { .. } => "full_rank_rls",
            AlgorithmConfig::KrylovNlms { .. } => "krylov_nlms",
        }
    }

    pub fn rank(&self) -> Option<usize> {
        match self {
            AlgorithmConfig::JioNlms { rank, .. } | AlgorithmConfig::KrylovNlms { rank, .. } => Some(*rank),
            _ => None,
        }
    }

    /// The same algorithm at rank `d`; full-rank algorithms are unchanged.
    pub fn with_rank(&self, d: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            AlgorithmConfig::JioNlms { rank, .. } | AlgorithmConfig::KrylovNlms { rank, .. } => *rank = d,
            _ => {}
        }
        out
    }

    pub fn build(&self, input_dim: usize) -> Result<Box<dyn AdaptiveFilter>> {
        Ok(match self {
            AlgorithmConfig::JioNlms {
                rank,
                mu0,
                eta0,
                step_mode,
            } => {
                let cfg = JioConfig {
                    step_mode: *step_mode,
                    ..JioConfig::new(*rank, *mu0, *eta0)
                };
                Box::new(JioNlms::new(input_dim, cfg)?)
            }
            AlgorithmConfig::FullRankNlms { mu0 } => Box::new(NlmsFilter::new(input_dim, *mu0)?),
            AlgorithmConfig::FullRankRls { lambda, delta } => Box::new(RlsFilter::new(input_dim, *lambda, *delta)?),
            AlgorithmConfig::KrylovNlms { rank, mu0, alpha } => {
                let cfg = KrylovNlmsConfig {
                    alpha: *alpha,
                    ..KrylovNlmsConfig::new(*rank, *mu0)
                };
                Box::new(KrylovNlms::new(input_dim, cfg)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Output SINR in dB, averaged in dB over runs.
    Sinr,
    /// Windowed bit error rate.
    Ber,
    /// Exact MSE `σ_d² − 2Re(w^H p) + w^H R w` of the current weights.
    Mse,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Sinr => "sinr_db",
            Metric::Ber => "ber",
            Metric::Mse => "mse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

fn default_runs() -> usize {
    200
}

fn default_train() -> usize {
    250
}

fn default_symbols() -> usize {
    1500
}

fn default_metric() -> Metric {
    Metric::Sinr
}

/// One experiment: scenario, algorithms and Monte Carlo protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default = "default_symbols")]
    pub n_symbols: usize,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_train")]
    pub n_train: usize,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Master seed; run `j` uses a scenario seed derived from it.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if self.n_symbols == 0 {
            return Err(Error::Config("n_symbols must be at least 1".into()));
        }
        let m = self.scenario.observation_len();
        for alg in &self.algorithms {
            if let Some(d) = alg.rank() {
                if d == 0 || d > m {
                    return Err(Error::Config(format!("{} rank {d} outside 1..={m}", alg.name())));
                }
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.parameter != "rank" {
                return Err(Error::Config(format!("unsupported sweep parameter `{}`", sw.parameter)));
            }
            for &v in &sw.values {
                if v.fract() != 0.0 || v < 1.0 || v > m as f64 {
                    return Err(Error::Config(format!("rank sweep value {v} outside 1..={m}")));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment specs serialize")
    }

    /// Scenario for run `run`.
    pub fn run_scenario(&self, run: usize) -> ScenarioConfig {
        ScenarioConfig {
            seed: run_seed(self.seed, run as u64),
            ..self.scenario.clone()
        }
    }
}

/// Seed for run `run`: the first draw of stream `run` of the master seed.
pub fn run_seed(master: u64, run: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(run);
    rng.random()
}

/// One curve: a metric per `x`, averaged over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub algorithm: String,
    pub metric: Metric,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    /// `per_run[run][k]` is the value at `x[k]`; NaN for diverged runs.
    pub per_run: Vec<Vec<f64>>,
    /// Runs stopped by the divergence guard, excluded from `mean`.
    pub diverged: usize,
}

impl Series {
    fn from_runs(algorithm: &str, metric: Metric, x: Vec<f64>, per_run: Vec<Vec<f64>>) -> Self {
        let mean = mean_over_runs(&per_run, x.len());
        let diverged = per_run.iter().filter(|r| r.iter().any(|v| v.is_nan())).count();
        if diverged > 0 {
            log::warn!("{algorithm}: {diverged} of {} runs diverged", per_run.len());
        }
        Series {
            algorithm: algorithm.to_string(),
            metric,
            x,
            mean,
            per_run,
            diverged,
        }
    }

    /// First `x` at which the mean reaches `level`.
    pub fn first_reaching(&self, level: f64) -> Option<f64> {
        self.x.iter().zip(&self.mean).find(|(_, &v)| v >= level).map(|(&x, _)| x)
    }
}

/// Column means in run order, skipping NaN entries (diverged runs).
pub fn mean_over_runs(per_run: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    let mut count = vec![0usize; len];
    for run in per_run {
        for ((a, c), v) in acc.iter_mut().zip(count.iter_mut()).zip(run) {
            if !v.is_nan() {
                *a += v;
                *c += 1;
            }
        }
    }
    acc.into_iter()
        .zip(count)
        .map(|(a, c)| if c == 0 { f64::NAN } else { a / c as f64 })
        .collect()
}

/// Maps a divergence to a NaN-filled row of `len` values.
fn or_diverged(out: Result<Vec<f64>>, len: usize) -> Result<Vec<f64>> {
    match out {
        Err(Error::Divergence { .. }) => Ok(vec![f64::NAN; len]),
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// `sinr_vs_rank`, `sinr_vs_symbols` or `ber_vs_symbols`.
    pub experiment: String,
    pub series: Vec<Series>,
    pub n_runs: usize,
    pub seed: u64,
    pub spec: ExperimentSpec,
}

impl ExperimentResult {
    pub fn series(&self, algorithm: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.algorithm == algorithm)
    }
}

/// SINR (or MSE) after each update; index `k` follows update `k + 1`.
fn sinr_trace(
    filter: &mut dyn AdaptiveFilter,
    samples: &[SymbolSample],
    exact: &crate::scenario::ExactStats,
    metric: Metric,
    record_from: usize,
) -> Result<Vec<f64>> {
    let mut values: Vec<Option<f64>> = Vec::with_capacity(samples.len() - record_from);
    for (i, s) in samples.iter().enumerate() {
        filter.update(&s.r, s.d)?;
        if i < record_from {
            continue;
        }
        let w = filter.effective_weights();
        values.push(match metric {
            Metric::Sinr => match sinr_db(&w, exact) {
                Ok(v) => Some(v),
                Err(Error::ZeroDenominator(_)) => None,
                Err(e) => return Err(e),
            },
            Metric::Mse => Some(exact.stats.mse(&w)),
            Metric::Ber => return Err(Error::Config("BER is not a per-filter metric".into())),
        });
    }
    backfill(values)
}

/// Replaces leading undefined values (zero filters) by the first defined
/// one.
fn backfill(values: Vec<Option<f64>>) -> Result<Vec<f64>> {
    let first = values
        .iter()
        .flatten()
        .copied()
        .next()
        .ok_or(Error::ZeroDenominator("filter stayed at zero"))?;
    let mut last = first;
    Ok(values
        .into_iter()
        .map(|v| {
            if let Some(v) = v {
                last = v;
            }
            last
        })
        .collect())
}

fn check_experiment(spec: &ExperimentSpec, fading: Option<FadingKind>) -> Result<()> {
    spec.validate()?;
    if spec.algorithms.is_empty() {
        return Err(Error::Config("no algorithms configured".into()));
    }
    if let Some(f) = fading {
        if spec.scenario.fading != f {
            return Err(Error::Config(format!("this experiment needs {f:?} fading")));
        }
    }
    Ok(())
}

/// Runs `f` for every run index in parallel, collecting in run order.
fn par_runs<T: Send>(n_runs: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n_runs).into_par_iter().map(f).collect()
}

fn transpose(runs: Vec<Vec<Vec<f64>>>, n_series: usize) -> Vec<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<Vec<f64>>> = (0..n_series).map(|_| Vec::with_capacity(runs.len())).collect();
    for run in runs {
        for (k, v) in run.into_iter().enumerate() {
            out[k].push(v);
        }
    }
    out
}

fn bound_sinr(exact: &crate::scenario::ExactStats) -> Result<f64> {
    let (w, _) = full_rank_wiener(&exact.stats)?;
    sinr_db(&w, exact)
}

/// Ranks of the sweep in `spec`.
pub fn swept_ranks(spec: &ExperimentSpec) -> Result<Vec<usize>> {
    let ranks: Vec<usize> = match &spec.sweep {
        Some(sw) => sw.values.iter().map(|&v| v as usize).collect(),
        None => return Err(Error::Config("SINR versus rank needs a rank sweep".into())),
    };
    if ranks.is_empty() {
        return Err(Error::Config("empty rank sweep".into()));
    }
    Ok(ranks)
}

/// Final-window (last 10%) mean SINR for each rank in the sweep.
///
/// Reduced-rank algorithms are rerun at every swept rank; full-rank
/// algorithms run once per realization and appear as flat lines.
pub fn run_sinr_vs_rank(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ranks = swept_ranks(spec)?;
    let table: Vec<Vec<AlgorithmConfig>> = spec
        .algorithms
        .iter()
        .map(|a| ranks.iter().map(|&d| a.with_rank(d)).collect())
        .collect();
    run_sinr_vs_rank_with(spec, &table)
}

/// As [`run_sinr_vs_rank`] with an explicit configuration per algorithm and
/// swept rank: `table[a][k]` runs at `ranks[k]`. Full-rank entries use
/// `table[a][0]`.
pub fn run_sinr_vs_rank_with(spec: &ExperimentSpec, table: &[Vec<AlgorithmConfig>]) -> Result<ExperimentResult> {
    check_experiment(spec, Some(FadingKind::Static))?;
    let ranks = swept_ranks(spec)?;
    if table.len() != spec.algorithms.len() || table.iter().any(|row| row.len() != ranks.len()) {
        return Err(Error::Config("per-rank configuration table does not match the sweep".into()));
    }
    let n = spec.n_symbols;
    let tail = (n / 10).max(1);
    let from = n - tail;
    let m = spec.scenario.observation_len();
    let n_alg = spec.algorithms.len();

    let runs = par_runs(spec.n_runs, |run| {
        let real = generate(&spec.run_scenario(run), n)?;
        let exact = exact_stats(&real, None)?;
        let samples: Vec<SymbolSample> = real.samples().collect();
        let mut rows = Vec::with_capacity(n_alg + 1);
        for (alg, configs) in spec.algorithms.iter().zip(table) {
            let mut row = Vec::with_capacity(ranks.len());
            if alg.rank().is_some() {
                for cfg in configs {
                    let mut f = cfg.build(m)?;
                    let tr = or_diverged(sinr_trace(f.as_mut(), &samples, &exact, spec.metric, from), tail)?;
                    row.push(tr.iter().sum::<f64>() / tr.len() as f64);
                }
            } else {
                let mut f = configs[0].build(m)?;
                let tr = or_diverged(sinr_trace(f.as_mut(), &samples, &exact, spec.metric, from), tail)?;
                row = vec![tr.iter().sum::<f64>() / tr.len() as f64; ranks.len()];
            }
            rows.push(row);
        }
        let bound = match spec.metric {
            Metric::Mse => full_rank_wiener(&exact.stats)?.1,
            _ => bound_sinr(&exact)?,
        };
        rows.push(vec![bound; ranks.len()]);
        Ok(rows)
    })?;

    let x: Vec<f64> = ranks.iter().map(|&d| d as f64).collect();
    let series = label_series(spec, transpose(runs, n_alg + 1), x);
    Ok(ExperimentResult {
        experiment: "sinr_vs_rank".into(),
        series,
        n_runs: spec.n_runs,
        seed: spec.seed,
        spec: spec.clone(),
    })
}

fn label_series(spec: &ExperimentSpec, per_series: Vec<Vec<Vec<f64>>>, x: Vec<f64>) -> Vec<Series> {
    let mut names: Vec<String> = spec.algorithms.iter().map(|a| a.name().to_string()).collect();
    disambiguate(&mut names, &spec.algorithms);
    names.push(BOUND_LABEL.into());
    names
        .iter()
        .zip(per_series)
        .map(|(name, runs)| Series::from_runs(name, spec.metric, x.clone(), runs))
        .collect()
}

/// Appends `_d<rank>` when the same algorithm appears more than once.
fn disambiguate(names: &mut [String], algs: &[AlgorithmConfig]) {
    for i in 0..names.len() {
        let clash = algs.iter().filter(|a| a.name() == algs[i].name()).count() > 1;
        if clash {
            if let Some(d) = algs[i].rank() {
                names[i] = format!("{}_d{d}", algs[i].name());
            }
        }
    }
}

/// SINR of each algorithm's current filter after every symbol.
pub fn run_sinr_vs_symbols(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    check_experiment(spec, Some(FadingKind::Static))?;
    if spec.metric == Metric::Ber {
        return Err(Error::Config("use the BER experiment for bit error rates".into()));
    }
    let n = spec.n_symbols;
    let m = spec.scenario.observation_len();
    let n_alg = spec.algorithms.len();
    let runs = par_runs(spec.n_runs, |run| {
        let real = generate(&spec.run_scenario(run), n)?;
        let exact = exact_stats(&real, None)?;
        let samples: Vec<SymbolSample> = real.samples().collect();
        let mut rows = Vec::with_capacity(n_alg + 1);
        for alg in &spec.algorithms {
            let mut f = alg.build(m)?;
            rows.push(or_diverged(sinr_trace(f.as_mut(), &samples, &exact, spec.metric, 0), n)?);
        }
        let bound = match spec.metric {
            Metric::Mse => full_rank_wiener(&exact.stats)?.1,
            _ => bound_sinr(&exact)?,
        };
        rows.push(vec![bound; n]);
        Ok(rows)
    })?;
    let x: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    Ok(ExperimentResult {
        experiment: "sinr_vs_symbols".into(),
        series: label_series(spec, transpose(runs, n_alg + 1), x),
        n_runs: spec.n_runs,
        seed: spec.seed,
        spec: spec.clone(),
    })
}

/// Windowed BER with training for `n_train` symbols, then decision-directed
/// adaptation.
pub fn run_ber_vs_symbols(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    check_experiment(spec, None)?;
    let n = spec.n_symbols;
    let m = spec.scenario.observation_len();
    let n_alg = spec.algorithms.len();
    let runs = par_runs(spec.n_runs, |run| {
        let real = generate(&spec.run_scenario(run), n)?;
        let samples: Vec<SymbolSample> = real.samples().collect();
        let truth: Vec<f64> = samples.iter().map(|s| s.d.re).collect();
        let mut rows = Vec::with_capacity(n_alg);
        for alg in &spec.algorithms {
            let mut f = alg.build(m)?;
            match run_decision_directed(f.as_mut(), samples.iter().cloned(), spec.n_train) {
                Ok(trace) => {
                    let ber = ber_estimate(&[trace.decisions], &[truth.clone()], BER_WINDOW)?;
                    rows.push(ber.mean);
                }
                Err(Error::Divergence { .. }) => rows.push(vec![f64::NAN; n]),
                Err(e) => return Err(e),
            }
        }
        Ok(rows)
    })?;
    let x: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let mut names: Vec<String> = spec.algorithms.iter().map(|a| a.name().to_string()).collect();
    disambiguate(&mut names, &spec.algorithms);
    let series = names
        .iter()
        .zip(transpose(runs, n_alg))
        .map(|(name, r)| Series::from_runs(name, Metric::Ber, x.clone(), r))
        .collect();
    Ok(ExperimentResult {
        experiment: "ber_vs_symbols".into(),
        series,
        n_runs: spec.n_runs,
        seed: spec.seed,
        spec: spec.clone(),
    })
}
