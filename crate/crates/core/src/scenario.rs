//! Simulation input bundle and converter bank sizing.

use serde::{Deserialize, Serialize};

use crate::battery::BatterySpec;
use crate::converter::{parallel_count, ConverterError, ConverterRole, ConverterSpec, EfficiencyCurve};
use crate::profile::{LoadCategory, LoadProfile, TimeSeries};
use crate::wiring::{wiring_loss, WiringCircuit};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("bus voltage must be positive, got {0} V")]
    InvalidVoltage(f64),
    #[error("pv series has {pv} samples at dt={pv_dt} h but loads have {loads} at dt={loads_dt} h")]
    Misaligned {
        pv: usize,
        pv_dt: f64,
        loads: usize,
        loads_dt: f64,
    },
    #[error("wiring circuit for {expected} is listed as {found}")]
    WiringOrder { expected: &'static str, found: &'static str },
    #[error(transparent)]
    Converter(#[from] ConverterError),
}

/// How a converter bank is chosen: a curve, plus optionally the unit rating
/// and an explicit unit count. Missing values are derived from the peak
/// power the bank must carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverterDesign {
    pub curve: EfficiencyCurve,
    pub unit_nominal: Option<f64>,
    pub parallel_count: Option<u32>,
}

impl ConverterDesign {
    pub fn new(curve: EfficiencyCurve) -> Self {
        Self {
            curve,
            unit_nominal: None,
            parallel_count: None,
        }
    }

    pub fn with_unit(curve: EfficiencyCurve, unit_nominal: f64) -> Self {
        Self {
            curve,
            unit_nominal: Some(unit_nominal),
            parallel_count: None,
        }
    }

    fn size(&self, role: ConverterRole, peak: f64) -> Result<ConverterSpec, ConverterError> {
        match (self.unit_nominal, self.parallel_count) {
            (Some(unit), Some(n)) => ConverterSpec::new(role, unit, n, self.curve.clone()),
            (Some(unit), None) => ConverterSpec::sized_for(role, unit, peak, self.curve.clone()),
            (None, n) => {
                let n = n.unwrap_or(1).max(1);
                let unit = if peak > 0.0 { peak / n as f64 } else { 1.0 };
                ConverterSpec::new(role, unit, n, self.curve.clone())
            }
        }
    }

    /// The battery bank is rated at exactly the battery's transfer cap; units
    /// split that rating between them.
    fn size_battery(&self, max_power: f64) -> Result<ConverterSpec, ConverterError> {
        let n = match (self.parallel_count, self.unit_nominal) {
            (Some(n), _) => n.max(1),
            (None, Some(unit)) if unit > 0.0 => parallel_count(max_power, unit),
            _ => 1,
        };
        ConverterSpec::new(ConverterRole::Battery, max_power / n as f64, n, self.curve.clone())
    }
}

/// Converter banks after sizing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverterSet {
    pub pv: ConverterSpec,
    pub ac_dc: ConverterSpec,
    pub battery: Option<ConverterSpec>,
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub bus_voltage: f64,
    pub loads: LoadProfile,
    /// PV power available at the PV converter input, already scaled.
    pub pv: TimeSeries,
    /// One circuit per category, in [`LoadCategory::ALL`] order.
    pub wiring: [WiringCircuit; 4],
    pub pv_converter: ConverterDesign,
    pub ac_dc_converter: ConverterDesign,
    pub battery_converter: ConverterDesign,
    pub battery: BatterySpec,
    /// Zero-net-energy factor the PV series was divided by, when applied.
    pub pv_scaling_factor: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.bus_voltage.is_finite() && self.bus_voltage > 0.0) {
            return Err(ScenarioError::InvalidVoltage(self.bus_voltage));
        }
        if self.pv.len() != self.loads.len() || self.pv.dt() != self.loads.dt() {
            return Err(ScenarioError::Misaligned {
                pv: self.pv.len(),
                pv_dt: self.pv.dt(),
                loads: self.loads.len(),
                loads_dt: self.loads.dt(),
            });
        }
        for (circuit, expected) in self.wiring.iter().zip(LoadCategory::ALL) {
            if circuit.category != expected {
                return Err(ScenarioError::WiringOrder {
                    expected: expected.name(),
                    found: circuit.category.name(),
                });
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.loads.len()
    }

    pub fn dt(&self) -> f64 {
        self.loads.dt()
    }

    /// Load plus wiring loss at step `t`, kW.
    pub fn bus_demand(&self, t: usize) -> f64 {
        LoadCategory::ALL
            .iter()
            .map(|&c| {
                let p = self.loads.category(c).samples()[t];
                p + wiring_loss(&self.wiring[c.index()], p, self.bus_voltage)
            })
            .sum()
    }

    /// Sizes the converter banks: PV for the PV peak, the grid interface for
    /// the larger of peak bus demand and peak PV, the battery converter at
    /// the battery's transfer cap.
    pub fn converters(&self) -> Result<ConverterSet, ScenarioError> {
        self.validate()?;
        let pv_peak = self.pv.peak();
        let demand_peak = (0..self.steps()).map(|t| self.bus_demand(t)).fold(0.0, f64::max);
        let pv = self.pv_converter.size(ConverterRole::Pv, pv_peak)?;
        let ac_dc = self
            .ac_dc_converter
            .size(ConverterRole::AcDc, demand_peak.max(pv_peak))?;
        let battery = if self.battery.is_present() {
            Some(self.battery_converter.size_battery(self.battery.max_transfer_power())?)
        } else {
            None
        };
        Ok(ConverterSet { pv, ac_dc, battery })
    }

    /// Same scenario with a different battery size (0 removes the battery).
    pub fn with_battery_capacity(&self, capacity: f64) -> Self {
        let mut s = self.clone();
        s.battery.capacity = capacity;
        s
    }
}
