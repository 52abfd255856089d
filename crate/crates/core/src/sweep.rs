//! Battery-capacity sweeps, the load × voltage × battery scenario matrix and
//! knee-based capacity selection.
//!
//! Every point is an independent full-horizon run; points are evaluated in
//! parallel and returned in request order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{simulate_year, AnnualReport, EngineError};
use crate::scenario::Scenario;

/// Default downtime slope (hours of BDT per kWh of capacity) below which
/// extra capacity is considered not worth adding.
pub const DEFAULT_KNEE_SLOPE: f64 = 1.0;

/// Default battery module size in kWh.
pub const DEFAULT_MODULE_KWH: f64 = 2.4;

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("capacity {capacity} kWh: {source}")]
    Point {
        capacity: f64,
        #[source]
        source: EngineError,
    },
    #[error("cell {load_model}/{bus_voltage} V/battery={battery}: {source}")]
    Cell {
        load_model: String,
        bus_voltage: f64,
        battery: bool,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("sweep needs at least one capacity")]
    NoCapacities,
    #[error("invalid capacity {0} kWh")]
    InvalidCapacity(f64),
    #[error("matrix axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("knee selection needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("sweep points must be sorted by strictly increasing capacity")]
    Unsorted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub capacity: f64,
    pub efficiency_pct: f64,
    pub bdt_hours: f64,
}

/// Capacities `start, start + step, …` up to and including `stop`, rounded
/// to 1e-9 kWh so that 2.4 × 10 prints as 24 rather than 23.999999999999996.
pub fn capacity_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return Vec::new();
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

/// One full run per capacity; the battery converter is re-rated to each
/// capacity's transfer cap.
pub fn battery_capacity_sweep(base: &Scenario, capacities: &[f64]) -> Result<Vec<SweepPoint>, SweepError> {
    if capacities.is_empty() {
        return Err(SweepError::NoCapacities);
    }
    if let Some(&c) = capacities.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(SweepError::InvalidCapacity(c));
    }
    capacities
        .par_iter()
        .map(|&capacity| {
            let report = simulate_year(&base.with_battery_capacity(capacity))
                .map_err(|source| SweepError::Point { capacity, source })?;
            Ok(SweepPoint {
                capacity,
                efficiency_pct: report.efficiency_pct,
                bdt_hours: report.bdt_hours,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub load_model: String,
    pub bus_voltage: f64,
    pub battery_enabled: bool,
    pub report: AnnualReport,
}

impl MatrixCell {
    /// Short identifier such as `low_48v_battery`.
    pub fn key(&self) -> String {
        format!(
            "{}_{}v_{}",
            self.load_model,
            self.bus_voltage,
            if self.battery_enabled { "battery" } else { "no_battery" }
        )
    }
}

/// Cartesian product of load models, voltages and battery options, ordered
/// load-major then voltage then battery. `build` supplies the scenario for a
/// (load model, voltage) pair; a disabled battery zeroes its capacity.
pub fn scenario_matrix<F, E>(
    load_models: &[String],
    voltages: &[f64],
    battery_options: &[bool],
    build: F,
) -> Result<Vec<MatrixCell>, SweepError>
where
    F: Fn(&str, f64) -> Result<Scenario, E> + Sync,
    E: std::error::Error + Send + Sync + 'static,
{
    if load_models.is_empty() {
        return Err(SweepError::EmptyAxis("load_models"));
    }
    if voltages.is_empty() {
        return Err(SweepError::EmptyAxis("voltages"));
    }
    if battery_options.is_empty() {
        return Err(SweepError::EmptyAxis("battery"));
    }
    let mut cells = Vec::new();
    for model in load_models {
        for &v in voltages {
            for &b in battery_options {
                cells.push((model.as_str(), v, b));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(model, voltage, battery)| {
            let cell_err = |source: Box<dyn std::error::Error + Send + Sync>| SweepError::Cell {
                load_model: model.to_string(),
                bus_voltage: voltage,
                battery,
                source,
            };
            let mut scenario = build(model, voltage).map_err(|e| cell_err(Box::new(e)))?;
            if !battery {
                scenario.battery.capacity = 0.0;
            }
            let report = simulate_year(&scenario).map_err(|e| cell_err(Box::new(e)))?;
            Ok(MatrixCell {
                load_model: model.to_string(),
                bus_voltage: voltage,
                battery_enabled: battery,
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KneeSelection {
    pub capacity: f64,
    /// False when downtime never flattens out; `capacity` is then the largest
    /// swept value.
    pub knee_found: bool,
}

/// Smallest capacity beyond which every interval's downtime slope stays
/// below `slope_threshold` (hours per kWh).
pub fn select_capacity_knee(points: &[SweepPoint], slope_threshold: f64) -> Result<KneeSelection, SweepError> {
    if points.len() < 2 {
        return Err(SweepError::TooFewPoints(points.len()));
    }
    if points.windows(2).any(|w| w[1].capacity <= w[0].capacity) {
        return Err(SweepError::Unsorted);
    }
    let steep = |w: &[SweepPoint]| {
        ((w[1].bdt_hours - w[0].bdt_hours) / (w[1].capacity - w[0].capacity)).abs() >= slope_threshold
    };
    let start = match points.windows(2).rposition(steep) {
        None => 0,
        Some(i) => i + 1,
    };
    if start + 1 < points.len() {
        Ok(KneeSelection {
            capacity: points[start].capacity,
            knee_found: true,
        })
    } else {
        Ok(KneeSelection {
            capacity: points[points.len() - 1].capacity,
            knee_found: false,
        })
    }
}

/// Rounds a capacity down to a whole number of modules (at least one).
pub fn snap_to_module(capacity: f64, module: f64) -> f64 {
    if !(module > 0.0) {
        return capacity;
    }
    let n = (capacity / module + 1e-9).floor().max(1.0);
    n * module
}
