//! Report files.
//!
//! | file              | contents                                              |
//! |-------------------|-------------------------------------------------------|
//! | `summary.json`    | every [`AnnualReport`] field                          |
//! | `losses.csv`      | `category,kwh,share_pct`                              |
//! | `histograms.csv`  | `converter,bin,share_pct,idle_pct`                    |
//! | `trace.csv`       | one row per step, see [`StepResult::TRACE_COLUMNS`]   |
//! | `sweep.csv`       | `capacity_kwh,efficiency_pct,bdt_hours`               |
//! | `knee.json`       | selected capacity                                     |
//! | `matrix.csv`      | `load_model,voltage,battery,efficiency_pct`           |
//! | `cells/<key>/`    | per-cell `summary.json`, `losses.csv`, `histograms.csv` |
//! | `run_meta.json`   | tool version, mode, config path, wall-clock time      |
//!
//! Floats are written in shortest round-trip form, so every file except
//! `run_meta.json` is a pure function of the inputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::{AnnualReport, HistogramReport, StepResult};
use crate::sweep::{KneeSelection, MatrixCell, SweepPoint};

pub const BIN_LABELS: [&str; 4] = ["0-25", "25-50", "50-75", "75-100"];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("writing {}: {source}", .path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |e| ReportError::IoFailure {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ReportError::IoFailure {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn ensure_dir(dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Rows of `losses.csv`: the four loss categories.
pub fn loss_rows(report: &AnnualReport) -> Vec<(&'static str, f64, f64)> {
    let l = &report.losses_kwh;
    let s = &report.loss_shares_pct;
    vec![
        ("pv_converter", l.pv_converter, s.pv_converter),
        ("ac_dc_converter", l.ac_dc_converter, s.ac_dc_converter),
        ("battery_converter", l.battery_converter, s.battery_converter),
        ("wiring", l.wiring, s.wiring),
    ]
}

/// Converters present in the run, with their histograms.
pub fn histogram_rows(report: &AnnualReport) -> Vec<(&'static str, &HistogramReport)> {
    let h = &report.histograms;
    let mut rows = vec![("pv", &h.pv), ("ac_dc", &h.ac_dc)];
    if report.converters.battery.is_some() {
        rows.push(("battery", &h.battery));
    }
    rows
}

/// Writes `summary.json`, `losses.csv` and `histograms.csv` into `dir`.
pub fn emit_report(report: &AnnualReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    ensure_dir(dir)?;
    let summary = dir.join("summary.json");
    write_json(&summary, report)?;

    let losses = dir.join("losses.csv");
    write_csv(
        &losses,
        &["category", "kwh", "share_pct"],
        loss_rows(report)
            .into_iter()
            .map(|(c, kwh, pct)| vec![c.to_string(), kwh.to_string(), pct.to_string()]),
    )?;

    let histograms = dir.join("histograms.csv");
    let mut rows = Vec::new();
    for (name, h) in histogram_rows(report) {
        for (label, share) in BIN_LABELS.iter().zip(h.shares_pct) {
            rows.push(vec![
                name.to_string(),
                label.to_string(),
                share.to_string(),
                h.idle_pct.to_string(),
            ]);
        }
    }
    write_csv(&histograms, &["converter", "bin", "share_pct", "idle_pct"], rows)?;
    Ok(vec![summary, losses, histograms])
}

pub fn emit_trace(steps: &[StepResult], dir: &Path) -> Result<PathBuf, ReportError> {
    ensure_dir(dir)?;
    let path = dir.join("trace.csv");
    write_csv(&path, &StepResult::TRACE_COLUMNS, steps.iter().map(StepResult::trace_record))?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct KneeFile {
    slope_threshold_h_per_kwh: f64,
    knee_capacity_kwh: f64,
    knee_found: bool,
    module_kwh: f64,
    selected_capacity_kwh: f64,
}

/// Writes `sweep.csv` and `knee.json`.
pub fn emit_sweep(
    points: &[SweepPoint],
    knee: Option<(KneeSelection, f64)>,
    slope_threshold: f64,
    module_kwh: f64,
    dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    ensure_dir(dir)?;
    let sweep = dir.join("sweep.csv");
    write_csv(
        &sweep,
        &["capacity_kwh", "efficiency_pct", "bdt_hours"],
        points.iter().map(|p| {
            vec![
                p.capacity.to_string(),
                p.efficiency_pct.to_string(),
                p.bdt_hours.to_string(),
            ]
        }),
    )?;
    let mut written = vec![sweep];
    if let Some((k, selected)) = knee {
        let path = dir.join("knee.json");
        write_json(
            &path,
            &KneeFile {
                slope_threshold_h_per_kwh: slope_threshold,
                knee_capacity_kwh: k.capacity,
                knee_found: k.knee_found,
                module_kwh,
                selected_capacity_kwh: selected,
            },
        )?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `matrix.csv` plus one report directory per cell under `cells/`.
pub fn emit_matrix(cells: &[MatrixCell], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    ensure_dir(dir)?;
    let path = dir.join("matrix.csv");
    write_csv(
        &path,
        &["load_model", "voltage", "battery", "efficiency_pct"],
        cells.iter().map(|c| {
            vec![
                c.load_model.clone(),
                c.bus_voltage.to_string(),
                c.battery_enabled.to_string(),
                c.report.efficiency_pct.to_string(),
            ]
        }),
    )?;
    let mut written = vec![path];
    for c in cells {
        written.extend(emit_report(&c.report, &dir.join("cells").join(c.key()))?);
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: String,
    pub config: String,
    pub unix_time_s: u64,
}

impl RunMeta {
    pub fn now(mode: &str, config: &Path) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            mode: mode.to_string(),
            config: config.display().to_string(),
            unix_time_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

pub fn write_run_meta(meta: &RunMeta, dir: &Path) -> Result<PathBuf, ReportError> {
    ensure_dir(dir)?;
    let path = dir.join("run_meta.json");
    write_json(&path, meta)?;
    Ok(path)
}
