//! Command-line front end: figure experiments, the complexity table, the
//! convergence model and the fixed-point demo.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rrjio::adaptive::{JioConfig, StepMode};
use rrjio::convergence::{
    build_model, complex_normal, divergence_onset, divergence_scan, empirical_error_trace, pilot_step_statistics,
    signal_in_noise_stats, stability_check, stability_threshold, OptimalPair, PILOT_SYMBOLS,
};
use rrjio::harness::{
    complexity_table, count_verify, default_spec, emit, emit_curves, mwf_literal_rows, run_figure, Curve,
    ExperimentSpec, Figure, TableRow,
};
use rrjio::mmse::{alternate_fixed_point, full_rank_wiener, FixedPointOptions, ProjectionMatrix, SecondOrderStats};
use rrjio::numerics::{hermitian_solve, CMatrix, CVector, HermitianMatrix};
use rrjio::{Error, ErrorCategory, Result};

#[derive(Parser)]
#[command(name = "rrjio", version, about = "Reduced-rank JIO adaptive filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state SINR versus rank.
    Fig2(FigureArgs),
    /// SINR versus received symbols.
    Fig3(FigureArgs),
    /// Windowed BER versus symbols under Clarke fading, decision directed.
    Fig4(FigureArgs),
    /// Per-update operation counts over a range of observation lengths.
    Table1(Common),
    /// Mean-error convergence model, stability threshold and divergence scan.
    Convergence(Common),
    /// Alternating fixed point on random second-order statistics.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo runs or instances (overrides the configuration).
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args)]
struct FigureArgs {
    #[command(flatten)]
    common: Common,
    /// Runs per candidate in the step-size grid search; 0 keeps the
    /// configured parameters.
    #[arg(long, default_value_t = 20)]
    tune_runs: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fig2(a) => figure(Figure::SinrVsRank, a),
        Command::Fig3(a) => figure(Figure::SinrVsSymbols, a),
        Command::Fig4(a) => figure(Figure::BerVsSymbols, a),
        Command::Table1(c) => table1(c),
        Command::Convergence(c) => convergence(c),
        Command::Oracle(c) => oracle(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Math => 3,
                ErrorCategory::Io => 4,
            })
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            let cfg = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            Ok(cfg)
        }
    }
}

fn report(files: &rrjio::harness::EmittedFiles) {
    println!("wrote {}", files.csv.display());
    if let Some(plot) = &files.plot {
        println!("wrote {}", plot.display());
    }
    println!("wrote {}", files.manifest.display());
}

fn figure(fig: Figure, args: FigureArgs) -> Result<()> {
    let c = args.common;
    let mut spec = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            ExperimentSpec::from_toml_str(&text)?
        }
        None => default_spec(fig),
    };
    if let Some(seed) = c.seed {
        spec.seed = seed;
    }
    if let Some(runs) = c.runs {
        spec.n_runs = runs;
    }
    let run = run_figure(fig, &spec, args.tune_runs)?;
    for (k, v) in &run.tuned {
        println!("{k} = {v}");
    }
    for s in &run.result.series {
        let last = s.mean.last().copied().unwrap_or(f64::NAN);
        println!("{:<24} final {} = {last:.4}", s.algorithm, s.metric.as_str());
    }
    report(&emit(&run.result, &c.out, &run.tuned)?);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Table1Config {
    rank: usize,
    m_min: usize,
    m_max: usize,
    /// Observation length at which instrumented counts are compared.
    verify_m: usize,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            rank: 4,
            m_min: 8,
            m_max: 64,
            verify_m: 32,
        }
    }
}

fn table1(c: Common) -> Result<()> {
    let cfg: Table1Config = read_config(c.config.as_deref())?;
    if cfg.m_min > cfg.m_max {
        return Err(Error::Config("m_min exceeds m_max".into()));
    }
    let ms: Vec<usize> = (cfg.m_min..=cfg.m_max).collect();
    let mut rows: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for (j, &m) in ms.iter().enumerate() {
        let mut table = complexity_table(m, cfg.rank)?;
        table.extend(mwf_literal_rows(m, cfg.rank)?);
        for (k, row) in table.iter().enumerate() {
            let name = if k >= TableRow::ALL.len() {
                format!("{}_literal", row.algorithm)
            } else {
                row.algorithm.to_string()
            };
            if j == 0 {
                rows.push((name, Vec::new(), Vec::new()));
            }
            rows[k].1.push(row.additions as f64);
            rows[k].2.push(row.multiplications as f64);
        }
    }
    let x: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let mut curves = Vec::new();
    for (name, adds, mults) in rows {
        curves.push(Curve {
            algorithm: name.clone(),
            metric: "additions".into(),
            x: x.clone(),
            y: adds,
        });
        curves.push(Curve {
            algorithm: name,
            metric: "multiplications".into(),
            x: x.clone(),
            y: mults,
        });
    }
    for row in [TableRow::FullRankNlms, TableRow::FullRankRls, TableRow::ProposedNlms] {
        let chk = count_verify(row, cfg.verify_m, cfg.rank)?;
        println!(
            "{:<20} M={} D={}: measured {}/{} adds/mults, table {}/{}",
            row.label(),
            cfg.verify_m,
            cfg.rank,
            chk.measured_adds,
            chk.measured_mults,
            chk.table_adds,
            chk.table_mults
        );
    }
    let manifest = vec![
        ("experiment".to_string(), "complexity".to_string()),
        ("rank".to_string(), cfg.rank.to_string()),
    ];
    let echo = toml::to_string(&cfg).expect("table config serializes");
    report(&emit_curves("complexity", &curves, 1, c.seed.unwrap_or(0), &c.out, &manifest, Some(&echo), true)?);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConvergenceConfig {
    input_dim: usize,
    rank: usize,
    noise_var: f64,
    mu0: f64,
    eta0: f64,
    step_mode: StepMode,
    n_symbols: usize,
    n_runs: usize,
    /// Step-size factors for the divergence scan, relative to the
    /// predicted threshold.
    scan: Vec<f64>,
    seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            input_dim: 8,
            rank: 1,
            noise_var: 0.01,
            mu0: 0.02,
            eta0: 0.05,
            step_mode: StepMode::InputNorm,
            n_symbols: 2000,
            n_runs: 40,
            scan: (-4..=4).map(|k| 1.25f64.powi(k)).collect(),
            seed: 7,
        }
    }
}

fn convergence(c: Common) -> Result<()> {
    let mut cfg: ConvergenceConfig = read_config(c.config.as_deref())?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = c.runs {
        cfg.n_runs = runs;
    }
    let stats = signal_in_noise_stats(cfg.input_dim, cfg.noise_var)?;
    let init = ProjectionMatrix::leading_identity(cfg.input_dim, cfg.rank)?;
    let opt = OptimalPair::from_fixed_point(&stats, &init)?.normalized()?;
    let jio = JioConfig {
        step_mode: cfg.step_mode,
        ..JioConfig::new(cfg.rank, cfg.mu0, cfg.eta0)
    };
    let steps = pilot_step_statistics(&stats, &jio, Some(&opt), PILOT_SYMBOLS, cfg.seed)?;
    let model = build_model(&stats, &opt, &opt.s_opt, steps.mu_mean, steps.nu_mean, steps.sigma_w2)?;
    let stab = stability_check(&model)?;
    println!(
        "pilot: E[mu] = {:.4e}, E[nu] = {:.4e}, sigma_w2 = {:.4}",
        steps.mu_mean, steps.nu_mean, steps.sigma_w2
    );
    println!(
        "model at base steps: rho = {:.6}, ||A||_2 = {:.6}, stable_mean = {}, stable_msd = {}",
        stab.rho, stab.norm2, stab.stable_mean, stab.stable_msd
    );
    let threshold = stability_threshold(&stats, &opt, &opt.s_opt, steps)?;
    println!("predicted threshold factor: {threshold:.4}");

    let factors: Vec<f64> = cfg.scan.iter().map(|f| f * threshold).collect();
    let scan = divergence_scan(&stats, &opt, &jio, Some(&opt), &factors, cfg.n_symbols, cfg.n_runs, cfg.seed)?;
    for p in &scan {
        println!("factor {:>10.4}: diverged {:.3}", p.factor, p.diverged_fraction);
    }
    match divergence_onset(&scan) {
        Some(onset) => println!("empirical onset: {onset:.4} ({:.3}x predicted)", onset / threshold),
        None => println!("empirical onset: beyond the scanned range"),
    }

    let trace = empirical_error_trace(&stats, &opt, &jio, None, cfg.n_symbols, cfg.n_runs, cfg.seed)?;
    println!(
        "error trace at base steps: {} completed, {} diverged",
        trace.completed_runs,
        trace.diverged.len()
    );
    let symbols: Vec<f64> = (0..trace.w_error.len()).map(|i| i as f64).collect();
    let curves = vec![
        Curve {
            algorithm: "jio_nlms".into(),
            metric: "w_error".into(),
            x: symbols.clone(),
            y: trace.w_error.clone(),
        },
        Curve {
            algorithm: "jio_nlms".into(),
            metric: "s_error".into(),
            x: symbols,
            y: trace.s_error.clone(),
        },
    ];
    let echo = toml::to_string(&cfg).expect("convergence config serializes");
    let manifest = vec![
        ("experiment".to_string(), "convergence".to_string()),
        ("predicted_threshold".to_string(), threshold.to_string()),
        ("rho_base".to_string(), stab.rho.to_string()),
        ("diverged_base".to_string(), trace.diverged.len().to_string()),
    ];
    report(&emit_curves(
        "convergence_trace",
        &curves,
        cfg.n_runs,
        cfg.seed,
        &c.out,
        &manifest,
        Some(&echo),
        true,
    )?);
    let scan_curve = vec![Curve {
        algorithm: "jio_nlms".into(),
        metric: "diverged_fraction".into(),
        x: scan.iter().map(|p| p.factor).collect(),
        y: scan.iter().map(|p| p.diverged_fraction).collect(),
    }];
    report(&emit_curves(
        "convergence_scan",
        &scan_curve,
        cfg.n_runs,
        cfg.seed,
        &c.out,
        &manifest,
        Some(&echo),
        false,
    )?);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OracleConfig {
    input_dim: usize,
    ranks: Vec<usize>,
    instances: usize,
    max_iters: usize,
    seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            input_dim: 16,
            ranks: vec![1, 2, 4],
            instances: 20,
            max_iters: 50,
            seed: 3,
        }
    }
}

/// Random statistics: `R = G G^H / M + 0.1 I`, `p` Gaussian, and `σ_d²`
/// one above the full-rank explained power.
fn random_stats(m: usize, rng: &mut ChaCha8Rng) -> Result<SecondOrderStats> {
    let g = CMatrix::from_fn(m, m, |_, _| complex_normal(rng));
    let r = (&g * g.adjoint()).unscale(m as f64) + CMatrix::identity(m, m).scale(0.1);
    let p = CVector::from_fn(m, |_, _| complex_normal(rng));
    let r = HermitianMatrix::symmetrized(r);
    let explained = p.dotc(&hermitian_solve(&r, &p)?).re;
    SecondOrderStats::new(r, p, explained + 1.0)
}

fn oracle(c: Common) -> Result<()> {
    let mut cfg: OracleConfig = read_config(c.config.as_deref())?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = c.runs {
        cfg.instances = runs;
    }
    if cfg.instances == 0 {
        return Err(Error::Config("need at least one instance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let instances: Vec<SecondOrderStats> = (0..cfg.instances)
        .map(|_| random_stats(cfg.input_dim, &mut rng))
        .collect::<Result<_>>()?;
    let mut curves = Vec::new();
    for &d in &cfg.ranks {
        let init = ProjectionMatrix::leading_identity(cfg.input_dim, d)?;
        let opts = FixedPointOptions {
            max_iters: cfg.max_iters,
            ..FixedPointOptions::default()
        };
        let mut gap_sum = vec![0.0; cfg.max_iters];
        let mut worst = 0.0f64;
        let mut iters = 0usize;
        for stats in &instances {
            let (_, bound) = full_rank_wiener(stats)?;
            let out = alternate_fixed_point(stats, &init, opts)?;
            iters = iters.max(out.mmse_trace.len());
            for (k, slot) in gap_sum.iter_mut().enumerate() {
                let v = out.mmse_trace.get(k).or(out.mmse_trace.last()).copied().unwrap_or(bound);
                *slot += (v - bound) / bound;
            }
            worst = worst.max((out.design.mmse - bound) / bound);
        }
        println!(
            "D = {d}: worst final relative gap {worst:.3e}, at most {iters} iterations over {} instances",
            cfg.instances
        );
        curves.push(Curve {
            algorithm: format!("d{d}"),
            metric: "relative_mmse_gap".into(),
            x: (1..=cfg.max_iters).map(|k| k as f64).collect(),
            y: gap_sum.iter().map(|s| (s / cfg.instances as f64).max(1e-16)).collect(),
        });
    }
    let echo = toml::to_string(&cfg).expect("oracle config serializes");
    let manifest = vec![("experiment".to_string(), "oracle".to_string())];
    report(&emit_curves(
        "oracle",
        &curves,
        cfg.instances,
        cfg.seed,
        &c.out,
        &manifest,
        Some(&echo),
        true,
    )?);
    Ok(())
}
