//! CSV, SVG and manifest output.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::{ExperimentResult, Metric};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["experiment", "algorithm", "x", "metric", "value", "n_runs", "seed"];

/// One curve in tidy form.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub algorithm: String,
    pub metric: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub plot: Option<PathBuf>,
    pub manifest: PathBuf,
}

/// Writes `<experiment>.csv`, `<experiment>.svg` and
/// `<experiment>_manifest.toml` into `out_dir`. `extra` lines are appended
/// to the manifest as string keys (e.g. tuned parameters).
pub fn emit(result: &ExperimentResult, out_dir: &Path, extra: &[(String, String)]) -> Result<EmittedFiles> {
    let curves: Vec<Curve> = result
        .series
        .iter()
        .map(|s| Curve {
            algorithm: s.algorithm.clone(),
            metric: s.metric.as_str().to_string(),
            x: s.x.clone(),
            y: s.mean.clone(),
        })
        .collect();
    let log_y = result.series.first().map(|s| s.metric == Metric::Ber).unwrap_or(false);
    let mut manifest = vec![
        ("experiment".to_string(), result.experiment.clone()),
        ("n_runs".to_string(), result.n_runs.to_string()),
        ("seed".to_string(), result.seed.to_string()),
    ];
    manifest.extend(extra.iter().cloned());
    emit_curves(
        &result.experiment,
        &curves,
        result.n_runs,
        result.seed,
        out_dir,
        &manifest,
        Some(&result.spec.to_toml_string()),
        log_y,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn emit_curves(
    experiment: &str,
    curves: &[Curve],
    n_runs: usize,
    seed: u64,
    out_dir: &Path,
    manifest: &[(String, String)],
    config_echo: Option<&str>,
    log_y: bool,
) -> Result<EmittedFiles> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv_path = out_dir.join(format!("{experiment}.csv"));
    fs::write(&csv_path, tidy_csv(experiment, curves, n_runs, seed)?).map_err(|e| Error::io(&csv_path, e))?;

    let empty = curves.iter().all(|c| c.x.is_empty());
    let plot = if empty {
        log::warn!("{experiment}: no data; wrote header-only CSV and no plot");
        None
    } else {
        let path = out_dir.join(format!("{experiment}.svg"));
        plot_svg(experiment, curves, &path, log_y)?;
        Some(path)
    };

    let manifest_path = out_dir.join(format!("{experiment}_manifest.toml"));
    fs::write(&manifest_path, manifest_text(manifest, config_echo)).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(EmittedFiles {
        csv: csv_path,
        plot,
        manifest: manifest_path,
    })
}

/// The tidy CSV as bytes.
pub fn tidy_csv(experiment: &str, curves: &[Curve], n_runs: usize, seed: u64) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Config(format!("CSV encoding: {e}"));
    w.write_record(CSV_HEADER).map_err(to_err)?;
    let (n_runs, seed) = (n_runs.to_string(), seed.to_string());
    for c in curves {
        for (x, y) in c.x.iter().zip(&c.y) {
            w.write_record([
                experiment,
                &c.algorithm,
                &x.to_string(),
                &c.metric,
                &y.to_string(),
                &n_runs,
                &seed,
            ])
            .map_err(to_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Config(format!("CSV encoding: {e}")))
}

fn manifest_text(entries: &[(String, String)], config_echo: Option<&str>) -> String {
    let mut table = toml::Table::new();
    table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    for (k, v) in entries {
        table.insert(k.clone(), v.clone().into());
    }
    let mut out = toml::to_string(&table).expect("string tables serialize");
    if let Some(cfg) = config_echo {
        out.push_str("\n# configuration\n");
        for line in cfg.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(0, 0, 0),
];

const LOG_FLOOR: f64 = 1e-5;

fn plot_svg(title: &str, curves: &[Curve], path: &Path, log_y: bool) -> Result<()> {
    let pts = curves.iter().flat_map(|c| c.x.iter().zip(&c.y)).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (&x, &y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        x1 = x0 + 1.0;
    }
    let draw_err = |e: String| Error::io(path, std::io::Error::other(e));
    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(e.to_string()))?;
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56);

    if log_y {
        let lo = y0.max(LOG_FLOOR);
        let hi = y1.max(lo * 10.0);
        let mut chart = builder
            .build_cartesian_2d(x0..x1, (lo..hi).log_scale())
            .map_err(|e| draw_err(e.to_string()))?;
        chart.configure_mesh().draw().map_err(|e| draw_err(e.to_string()))?;
        for (k, c) in curves.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let data = c.x.iter().zip(&c.y).map(|(&x, &y)| (x, y.max(LOG_FLOOR)));
            chart
                .draw_series(LineSeries::new(data, color))
                .map_err(|e| draw_err(e.to_string()))?
                .label(c.algorithm.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE)
            .border_style(BLACK)
            .draw()
            .map_err(|e| draw_err(e.to_string()))?;
    } else {
        let pad = ((y1 - y0) * 0.05).max(1e-9);
        let mut chart = builder
            .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
            .map_err(|e| draw_err(e.to_string()))?;
        chart.configure_mesh().draw().map_err(|e| draw_err(e.to_string()))?;
        for (k, c) in curves.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let data = c.x.iter().zip(&c.y).map(|(&x, &y)| (x, y));
            chart
                .draw_series(LineSeries::new(data, color))
                .map_err(|e| draw_err(e.to_string()))?
                .label(c.algorithm.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE)
            .border_style(BLACK)
            .draw()
            .map_err(|e| draw_err(e.to_string()))?;
    }
    root.present().map_err(|e| draw_err(e.to_string()))
}
