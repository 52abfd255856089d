//! Helpers shared by the integration tests, including oracles that recompute
//! quantities from first principles without calling the library's own
//! formulas.

#![allow(dead_code)]

use std::fs::File;
use std::path::PathBuf;

use nanogrid::config::load_scenario;
use nanogrid::converter::EfficiencyCurve;
use nanogrid::profile::{LoadProfile, TimeSeries};
use nanogrid::scenario::{ConverterDesign, Scenario};
use nanogrid::wiring::WiringCircuit;
use nanogrid::{BatterySpec, LoadCategory};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(&fixtures().join("scenarios").join(format!("{name}.toml")))
        .unwrap_or_else(|e| panic!("fixture scenario {name}: {e}"))
}

pub fn curve(name: &str) -> EfficiencyCurve {
    let f = File::open(fixtures().join("curves").join(format!("{name}.csv"))).unwrap();
    EfficiencyCurve::from_csv(f).unwrap()
}

/// Linear interpolation over raw `(fraction, efficiency)` pairs, written
/// with a linear scan rather than a binary search.
pub fn oracle_efficiency(points: &[(f64, f64)], fraction: f64) -> f64 {
    if fraction <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if fraction <= x1 {
            return y0 + (y1 - y0) * (fraction - x0) / (x1 - x0);
        }
    }
    points[points.len() - 1].1
}

pub fn curve_pairs(curve: &EfficiencyCurve) -> Vec<(f64, f64)> {
    curve.points().iter().map(|p| (p.load_fraction, p.efficiency)).collect()
}

/// I²R loss of one circuit in kW, straight from the physics.
pub fn oracle_wiring_loss(r_eq_mohm: f64, power_kw: f64, voltage: f64) -> f64 {
    let current = power_kw * 1000.0 / voltage;
    r_eq_mohm / 1000.0 * current * current / 1000.0
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// A scenario assembled in code from per-step vectors.
#[derive(Debug, Clone)]
pub struct Builder {
    pub voltage: f64,
    pub loads: [Vec<f64>; 4],
    pub pv: Vec<f64>,
    pub r_eq_mohm: [f64; 4],
    pub pv_curve: EfficiencyCurve,
    pub ac_dc_curve: EfficiencyCurve,
    pub battery_curve: EfficiencyCurve,
    pub battery: BatterySpec,
}

impl Builder {
    pub fn new(voltage: f64, loads: [Vec<f64>; 4], pv: Vec<f64>) -> Self {
        Self {
            voltage,
            loads,
            pv,
            r_eq_mohm: [0.0; 4],
            pv_curve: EfficiencyCurve::ideal(),
            ac_dc_curve: EfficiencyCurve::ideal(),
            battery_curve: EfficiencyCurve::ideal(),
            battery: BatterySpec::default(),
        }
    }

    pub fn build(self) -> Scenario {
        let series = |v: Vec<f64>| TimeSeries::hourly(v).unwrap();
        let [hvac, lighting, equipment, water] = self.loads;
        let wiring = LoadCategory::ALL.map(|c| WiringCircuit::direct(c, self.r_eq_mohm[c.index()]).unwrap());
        Scenario {
            label: "built".into(),
            bus_voltage: self.voltage,
            loads: LoadProfile::new(series(hvac), series(lighting), series(equipment), series(water)).unwrap(),
            pv: series(self.pv),
            wiring,
            pv_converter: ConverterDesign::new(self.pv_curve),
            ac_dc_converter: ConverterDesign::new(self.ac_dc_curve),
            battery_converter: ConverterDesign::new(self.battery_curve),
            battery: self.battery,
            pv_scaling_factor: None,
        }
    }
}
