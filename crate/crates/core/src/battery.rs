//! Rule-based battery controller.
//!
//! The battery charges only from PV surplus on the bus and discharges only
//! into a bus deficit. Power is capped at `capacity / c_rate_divisor` on the
//! battery side of the converter and the state of charge is held inside
//! `[soc_min, soc_max]`. Sitting at `soc_min` while the bus is short leaves
//! the battery disconnected, and those hours accumulate as downtime until a
//! step with positive surplus reconnects it.
//!
//! The cells themselves are lossless; every conversion loss is booked to
//! the battery converter.

use serde::{Deserialize, Serialize};

use crate::converter::{ConverterError, ConverterSpec};

/// Slack when comparing the state of charge against its floor.
const SOC_EPSILON: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BatteryError {
    #[error("invalid battery: {0}")]
    InvalidSpec(String),
    #[error("battery of {0} kWh needs a battery converter")]
    MissingConverter(f64),
    #[error(transparent)]
    Converter(#[from] ConverterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    /// Nominal capacity in kWh; zero means no battery.
    pub capacity: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// Hours to move a full capacity at the power cap (4 gives the C/4 rate).
    pub c_rate_divisor: f64,
    /// Starting state of charge; `None` starts mid-window.
    pub initial_soc: Option<f64>,
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self {
            capacity: 0.0,
            soc_min: 0.20,
            soc_max: 1.00,
            c_rate_divisor: 4.0,
            initial_soc: None,
        }
    }
}

impl BatterySpec {
    pub fn with_capacity(capacity: f64) -> Result<Self, BatteryError> {
        Self {
            capacity,
            ..Self::default()
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, BatteryError> {
        if !(self.capacity.is_finite() && self.capacity >= 0.0) {
            return Err(BatteryError::InvalidSpec(format!("capacity {} kWh", self.capacity)));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return Err(BatteryError::InvalidSpec(format!(
                "SOC window [{}, {}]",
                self.soc_min, self.soc_max
            )));
        }
        if !(self.c_rate_divisor.is_finite() && self.c_rate_divisor > 0.0) {
            return Err(BatteryError::InvalidSpec(format!(
                "c-rate divisor {}",
                self.c_rate_divisor
            )));
        }
        if let Some(soc) = self.initial_soc {
            if !(self.soc_min..=self.soc_max).contains(&soc) {
                return Err(BatteryError::InvalidSpec(format!(
                    "initial SOC {soc} outside [{}, {}]",
                    self.soc_min, self.soc_max
                )));
            }
        }
        Ok(self)
    }

    pub fn is_present(&self) -> bool {
        self.capacity > 0.0
    }

    /// Charge and discharge cap at the battery terminals, kW.
    pub fn max_transfer_power(&self) -> f64 {
        self.capacity / self.c_rate_divisor
    }

    pub fn initial_state(&self) -> BatteryState {
        BatteryState {
            soc: self
                .initial_soc
                .unwrap_or(self.soc_min + 0.5 * (self.soc_max - self.soc_min)),
            disconnected: false,
            bdt_hours: 0.0,
        }
    }
}

/// Functional form of [`BatterySpec::max_transfer_power`].
pub fn max_transfer_power(spec: &BatterySpec) -> f64 {
    spec.max_transfer_power()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub soc: f64,
    pub disconnected: bool,
    /// Accumulated battery downtime.
    pub bdt_hours: f64,
}

/// Result of one controller step. Positive powers charge the battery.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BatteryAction {
    /// At the battery terminals.
    pub battery_side_power: f64,
    /// Drawn from the bus when positive, delivered to it when negative.
    pub bus_side_power: f64,
    pub converter_loss: f64,
}

/// Advances the controller by one step of `dt` hours given the bus surplus
/// (PV output minus demand, kW).
pub fn dispatch(
    state: &BatteryState,
    spec: &BatterySpec,
    excess_bus_power: f64,
    converter: Option<&ConverterSpec>,
    dt: f64,
) -> Result<(BatteryAction, BatteryState), BatteryError> {
    debug_assert!(dt > 0.0);
    if !spec.is_present() {
        return Ok((BatteryAction::default(), *state));
    }
    let converter = converter.ok_or(BatteryError::MissingConverter(spec.capacity))?;
    let cap_power = spec.max_transfer_power();
    let nominal = converter.total_nominal();

    if excess_bus_power > 0.0 {
        let mut next = BatteryState {
            disconnected: false,
            ..*state
        };
        let headroom_power = ((spec.soc_max - state.soc) * spec.capacity / dt).max(0.0);
        let bus_available = excess_bus_power.min(nominal);
        let surplus = converter.convert_known_input(bus_available)?;

        let action = if surplus.output <= cap_power && surplus.output <= headroom_power {
            BatteryAction {
                battery_side_power: surplus.output,
                bus_side_power: surplus.input,
                converter_loss: surplus.loss,
            }
        } else {
            let battery_side = cap_power.min(headroom_power);
            // known-side approximation can ask for slightly more than is on offer
            let bus_side = converter.convert_known_output(battery_side)?.input.min(bus_available);
            BatteryAction {
                battery_side_power: battery_side,
                bus_side_power: bus_side,
                converter_loss: bus_side - battery_side,
            }
        };

        next.soc = if action.battery_side_power >= headroom_power {
            spec.soc_max
        } else {
            (state.soc + action.battery_side_power * dt / spec.capacity).min(spec.soc_max)
        };
        return Ok((action, next));
    }

    if state.soc <= spec.soc_min + SOC_EPSILON {
        let next = BatteryState {
            soc: spec.soc_min,
            disconnected: true,
            bdt_hours: state.bdt_hours + dt,
        };
        return Ok((BatteryAction::default(), next));
    }

    if excess_bus_power == 0.0 {
        return Ok((BatteryAction::default(), *state));
    }

    let available_power = (state.soc - spec.soc_min) * spec.capacity / dt;
    let bus_needed = (-excess_bus_power).min(nominal);
    let demand = converter.convert_known_output(bus_needed)?;

    let (battery_side, bus_side) = if demand.input <= cap_power && demand.input <= available_power {
        (demand.input, demand.output)
    } else {
        let battery_side = cap_power.min(available_power);
        let delivered = converter.convert_known_input(battery_side)?.output.min(bus_needed);
        (battery_side, delivered)
    };
    let action = BatteryAction {
        battery_side_power: -battery_side,
        bus_side_power: -bus_side,
        converter_loss: battery_side - bus_side,
    };
    let soc = if battery_side >= available_power {
        spec.soc_min
    } else {
        (state.soc - battery_side * dt / spec.capacity).max(spec.soc_min)
    };
    Ok((
        action,
        BatteryState {
            soc,
            disconnected: false,
            bdt_hours: state.bdt_hours,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::{ConverterRole, EfficiencyCurve};

    fn ideal_converter(spec: &BatterySpec) -> ConverterSpec {
        ConverterSpec::new(
            ConverterRole::Battery,
            spec.max_transfer_power(),
            1,
            EfficiencyCurve::ideal(),
        )
        .unwrap()
    }

    fn at(soc: f64) -> BatteryState {
        BatteryState {
            soc,
            disconnected: false,
            bdt_hours: 0.0,
        }
    }

    #[test]
    fn transfer_caps() {
        assert!((max_transfer_power(&BatterySpec::with_capacity(19.2).unwrap()) - 4.8).abs() < 1e-12);
        assert!((max_transfer_power(&BatterySpec::with_capacity(67.2).unwrap()) - 16.8).abs() < 1e-12);
        assert_eq!(max_transfer_power(&BatterySpec::with_capacity(0.0).unwrap()), 0.0);
    }

    #[test]
    fn charge_limited_by_c_rate() {
        let spec = BatterySpec::with_capacity(19.2).unwrap();
        let conv = ideal_converter(&spec);
        let (a, s) = dispatch(&at(0.5), &spec, 10.0, Some(&conv), 1.0).unwrap();
        assert!((a.battery_side_power - 4.8).abs() < 1e-12);
        assert!((a.bus_side_power - 4.8).abs() < 1e-12);
        assert!((s.soc - 0.75).abs() < 1e-12);
    }

    #[test]
    fn charge_limited_by_headroom_lands_on_max() {
        let spec = BatterySpec::with_capacity(19.2).unwrap();
        let conv = ideal_converter(&spec);
        let (a, s) = dispatch(&at(0.99), &spec, 10.0, Some(&conv), 1.0).unwrap();
        assert!((a.battery_side_power - 0.192).abs() < 1e-12);
        assert_eq!(s.soc, 1.0);
    }

    #[test]
    fn floor_disconnects_and_accrues_downtime() {
        let spec = BatterySpec::with_capacity(19.2).unwrap();
        let conv = ideal_converter(&spec);
        let (a, s) = dispatch(&at(0.20), &spec, -2.0, Some(&conv), 1.0).unwrap();
        assert_eq!(a, BatteryAction::default());
        assert!(s.disconnected);
        assert_eq!(s.bdt_hours, 1.0);
        // reconnects on the first surplus
        let (_, s2) = dispatch(&s, &spec, 1.0, Some(&conv), 1.0).unwrap();
        assert!(!s2.disconnected);
        assert_eq!(s2.bdt_hours, 1.0);
    }

    #[test]
    fn discharge_meets_deficit_through_lossy_converter() {
        let spec = BatterySpec::with_capacity(19.2).unwrap();
        let conv = ConverterSpec::new(
            ConverterRole::Battery,
            4.8,
            1,
            EfficiencyCurve::flat(0.9).unwrap(),
        )
        .unwrap();
        let (a, s) = dispatch(&at(0.6), &spec, -0.9, Some(&conv), 1.0).unwrap();
        assert!((a.bus_side_power + 0.9).abs() < 1e-12);
        assert!((a.battery_side_power + 1.0).abs() < 1e-12);
        assert!((a.converter_loss - 0.1).abs() < 1e-12);
        assert!((s.soc - (0.6 - 1.0 / 19.2)).abs() < 1e-12);
    }

    #[test]
    fn discharge_limited_by_available_energy_lands_on_min() {
        let spec = BatterySpec::with_capacity(10.0).unwrap();
        let conv = ideal_converter(&spec);
        let (a, s) = dispatch(&at(0.25), &spec, -2.0, Some(&conv), 1.0).unwrap();
        assert!((a.battery_side_power + 0.5).abs() < 1e-12);
        assert_eq!(s.soc, 0.2);
        assert!(!s.disconnected);
        assert_eq!(s.bdt_hours, 0.0);
    }

    #[test]
    fn zero_excess_above_floor_is_idle() {
        let spec = BatterySpec::with_capacity(10.0).unwrap();
        let conv = ideal_converter(&spec);
        let (a, s) = dispatch(&at(0.5), &spec, 0.0, Some(&conv), 1.0).unwrap();
        assert_eq!(a, BatteryAction::default());
        assert_eq!(s, at(0.5));
    }

    #[test]
    fn absent_battery_never_acts() {
        let spec = BatterySpec::default();
        let (a, s) = dispatch(&spec.initial_state(), &spec, -3.0, None, 1.0).unwrap();
        assert_eq!(a, BatteryAction::default());
        assert_eq!(s.bdt_hours, 0.0);
    }

    #[test]
    fn present_battery_needs_converter() {
        let spec = BatterySpec::with_capacity(1.0).unwrap();
        assert!(matches!(
            dispatch(&spec.initial_state(), &spec, 1.0, None, 1.0),
            Err(BatteryError::MissingConverter(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(BatterySpec::with_capacity(-1.0).is_err());
        let bad = BatterySpec {
            soc_min: 0.9,
            soc_max: 0.5,
            ..BatterySpec::default()
        };
        assert!(bad.validated().is_err());
        let bad_init = BatterySpec {
            initial_soc: Some(0.1),
            ..BatterySpec::default()
        };
        assert!(bad_init.validated().is_err());
        assert!((BatterySpec::default().initial_state().soc - 0.6).abs() < 1e-15);
    }
}
