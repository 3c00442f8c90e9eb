//! Coarse grid search for step sizes and forgetting factors.

use serde::{Deserialize, Serialize};

use super::{run_ber_vs_symbols, run_sinr_vs_symbols, AlgorithmConfig, ExperimentSpec, Metric, BOUND_LABEL};
use crate::error::{Error, Result};

/// Candidate `μ₀` / `η₀` values: doubling from 0.05, capped at 1.
pub const MU_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.4, 0.8, 1.0];
/// Candidate RLS forgetting factors.
pub const LAMBDA_GRID: [f64; 2] = [0.995, 0.998];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TuningObjective {
    /// Maximize mean SINR over the last 10% of symbols.
    FinalSinr,
    /// Minimize symbols until the mean SINR reaches the bound minus
    /// `margin_db`, among candidates whose final SINR is within
    /// `final_within_db` of the bound (all filters tuned to converge to the
    /// same level). Misses fall back to final SINR.
    TimeToBound { margin_db: f64, final_within_db: f64 },
    /// Minimize mean BER from symbol `from` on.
    Ber { from: usize },
}

#[derive(Debug, Clone)]
pub struct TuningReport {
    pub chosen: Vec<AlgorithmConfig>,
    /// `(candidate, score)` per algorithm, lower score is better.
    pub scores: Vec<Vec<(AlgorithmConfig, f64)>>,
    pub objective: TuningObjective,
    pub runs: usize,
    pub seed: u64,
}

fn candidates(alg: &AlgorithmConfig) -> Vec<AlgorithmConfig> {
    match alg {
        AlgorithmConfig::JioNlms { rank, step_mode, .. } => MU_GRID
            .iter()
            .flat_map(|&mu0| {
                MU_GRID.iter().map(move |&eta0| AlgorithmConfig::JioNlms {
                    rank: *rank,
                    mu0,
                    eta0,
                    step_mode: *step_mode,
                })
            })
            .collect(),
        AlgorithmConfig::FullRankNlms { .. } => MU_GRID.iter().map(|&mu0| AlgorithmConfig::FullRankNlms { mu0 }).collect(),
        AlgorithmConfig::FullRankRls { delta, .. } => LAMBDA_GRID
            .iter()
            .map(|&lambda| AlgorithmConfig::FullRankRls { lambda, delta: *delta })
            .collect(),
        AlgorithmConfig::KrylovNlms { rank, alpha, .. } => MU_GRID
            .iter()
            .map(|&mu0| AlgorithmConfig::KrylovNlms {
                rank: *rank,
                mu0,
                alpha: *alpha,
            })
            .collect(),
    }
}

/// Score of one candidate; lower is better. Diverging candidates score
/// `+∞`.
fn score(spec: &ExperimentSpec, objective: TuningObjective) -> Result<f64> {
    let outcome = match objective {
        TuningObjective::Ber { .. } => run_ber_vs_symbols(spec),
        _ => run_sinr_vs_symbols(spec),
    };
    let res = match outcome {
        Ok(r) => r,
        Err(Error::Divergence { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let curve = &res.series[0];
    if curve.diverged > 0 {
        return Ok(f64::INFINITY);
    }
    let n = curve.mean.len();
    let tail = (n / 10).max(1);
    let final_mean = curve.mean[n - tail..].iter().sum::<f64>() / tail as f64;
    Ok(match objective {
        TuningObjective::FinalSinr => -final_mean,
        TuningObjective::TimeToBound {
            margin_db,
            final_within_db,
        } => {
            let bound = res.series(BOUND_LABEL).map(|s| s.mean[0]).unwrap_or(f64::INFINITY);
            let shortfall = bound - final_mean;
            let hit = curve.first_reaching(bound - margin_db);
            match hit {
                Some(t) if shortfall <= final_within_db => t - 1e-3 * final_mean.clamp(-100.0, 100.0) / 100.0,
                // Ranked after every admissible candidate, by final SINR.
                _ => 1e6 + shortfall,
            }
        }
        TuningObjective::Ber { from } => {
            let from = from.min(n - 1);
            curve.mean[from..].iter().sum::<f64>() / (n - from) as f64
        }
    })
}

/// Grid-searches every algorithm of `spec` on `runs` runs of seed `seed`
/// and returns the best candidate for each; the first of equal scores
/// wins.
pub fn tune(spec: &ExperimentSpec, objective: TuningObjective, runs: usize, seed: u64) -> Result<TuningReport> {
    if runs == 0 {
        return Err(Error::Config("tuning needs at least one run".into()));
    }
    let mut chosen = Vec::with_capacity(spec.algorithms.len());
    let mut all_scores = Vec::with_capacity(spec.algorithms.len());
    for alg in &spec.algorithms {
        let mut scores = Vec::new();
        for cand in candidates(alg) {
            let sub = ExperimentSpec {
                algorithms: vec![cand.clone()],
                n_runs: runs,
                seed,
                sweep: None,
                metric: match objective {
                    TuningObjective::Ber { .. } => Metric::Ber,
                    _ => Metric::Sinr,
                },
                ..spec.clone()
            };
            scores.push((cand, score(&sub, objective)?));
        }
        let best = scores
            .iter()
            .fold(None::<&(AlgorithmConfig, f64)>, |acc, c| match acc {
                Some(a) if a.1 <= c.1 => Some(a),
                _ => Some(c),
            })
            .map(|c| c.0.clone())
            .expect("grids are non-empty");
        log::info!("tuned {}: {:?}", alg.name(), best);
        chosen.push(best);
        all_scores.push(scores);
    }
    Ok(TuningReport {
        chosen,
        scores: all_scores,
        objective,
        runs,
        seed,
    })
}
