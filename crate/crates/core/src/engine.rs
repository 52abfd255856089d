//! Hourly energy balance of the nanogrid and annual loss accounting.
//!
//! Each step resolves the bus in topology order: loads and their wiring
//! losses, PV through its converter, the battery controller acting on the
//! PV surplus, and finally the grid interface absorbing whatever remains.

use serde::{Deserialize, Serialize};

use crate::battery::{dispatch, BatteryError, BatteryState};
use crate::converter::{Conversion, ConverterError, ConverterSpec, OperatingHistogram};
use crate::profile::LoadCategory;
use crate::scenario::{ConverterSet, Scenario, ScenarioError};
use crate::wiring::wiring_loss;

/// Per-step bus balance tolerance, relative to the largest power in the step
/// (and absolute below 1 kW).
pub const STEP_BALANCE_TOLERANCE: f64 = 1e-9;

/// Annual balance tolerance relative to the annual energy throughput.
pub const ANNUAL_BALANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("step {t}: {source}")]
    Converter {
        t: usize,
        #[source]
        source: ConverterError,
    },
    #[error("step {t}: {source}")]
    Battery {
        t: usize,
        #[source]
        source: BatteryError,
    },
    #[error("step {t}: bus balance off by {residual:e} kW")]
    ConservationViolation { t: usize, residual: f64 },
    #[error("annual energy balance off by {residual:e} kWh")]
    AnnualBalanceViolation { residual: f64 },
    #[error("total load energy is zero; efficiency is undefined")]
    ZeroLoadYear,
    #[error("timestep {t} outside the {len}-step horizon")]
    StepOutOfRange { t: usize, len: usize },
}

impl EngineError {
    /// True for failures that indicate a broken invariant rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            EngineError::ConservationViolation { .. } | EngineError::AnnualBalanceViolation { .. }
        )
    }
}

/// One value per load category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryValues {
    pub hvac: f64,
    pub lighting: f64,
    pub interior_equipment: f64,
    pub water_heater: f64,
}

impl CategoryValues {
    pub fn get(&self, c: LoadCategory) -> f64 {
        match c {
            LoadCategory::Hvac => self.hvac,
            LoadCategory::Lighting => self.lighting,
            LoadCategory::InteriorEquipment => self.interior_equipment,
            LoadCategory::WaterHeater => self.water_heater,
        }
    }

    fn get_mut(&mut self, c: LoadCategory) -> &mut f64 {
        match c {
            LoadCategory::Hvac => &mut self.hvac,
            LoadCategory::Lighting => &mut self.lighting,
            LoadCategory::InteriorEquipment => &mut self.interior_equipment,
            LoadCategory::WaterHeater => &mut self.water_heater,
        }
    }

    pub fn total(&self) -> f64 {
        self.hvac + self.lighting + self.interior_equipment + self.water_heater
    }

    fn add_scaled(&mut self, other: &CategoryValues, factor: f64) {
        for c in LoadCategory::ALL {
            *self.get_mut(c) += other.get(c) * factor;
        }
    }
}

/// Every power flow of one timestep, kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub t: usize,
    pub load: CategoryValues,
    pub wiring_loss: CategoryValues,
    pub load_total: f64,
    pub wiring_loss_total: f64,
    pub bus_demand: f64,
    /// PV power offered before any clipping at the converter rating.
    pub pv_available: f64,
    pub pv_curtailed: f64,
    pub pv_input: f64,
    pub pv_output: f64,
    pub pv_loss: f64,
    /// PV output minus bus demand.
    pub excess: f64,
    /// Positive while charging.
    pub battery_side_power: f64,
    /// Positive when drawn from the bus.
    pub battery_bus_power: f64,
    pub battery_loss: f64,
    pub soc: f64,
    pub battery_disconnected: bool,
    pub export_bus: f64,
    pub export_grid: f64,
    pub import_bus: f64,
    pub import_grid: f64,
    pub ac_dc_loss: f64,
    /// Sources minus sinks on the bus.
    pub conservation_residual: f64,
}

impl StepResult {
    /// Column order of the per-step trace CSV.
    pub const TRACE_COLUMNS: [&'static str; 30] = [
        "t",
        "load_hvac_kw",
        "load_lighting_kw",
        "load_interior_equipment_kw",
        "load_water_heater_kw",
        "wiring_loss_hvac_kw",
        "wiring_loss_lighting_kw",
        "wiring_loss_interior_equipment_kw",
        "wiring_loss_water_heater_kw",
        "load_total_kw",
        "wiring_loss_total_kw",
        "bus_demand_kw",
        "pv_available_kw",
        "pv_curtailed_kw",
        "pv_input_kw",
        "pv_output_kw",
        "pv_loss_kw",
        "excess_kw",
        "battery_side_kw",
        "battery_bus_kw",
        "battery_loss_kw",
        "soc",
        "battery_disconnected",
        "export_bus_kw",
        "export_grid_kw",
        "import_bus_kw",
        "import_grid_kw",
        "ac_dc_loss_kw",
        "total_loss_kw",
        "conservation_residual_kw",
    ];

    pub fn total_loss(&self) -> f64 {
        self.wiring_loss_total + self.pv_loss + self.battery_loss + self.ac_dc_loss
    }

    pub fn trace_record(&self) -> Vec<String> {
        let mut r = vec![self.t.to_string()];
        for v in [
            self.load.hvac,
            self.load.lighting,
            self.load.interior_equipment,
            self.load.water_heater,
            self.wiring_loss.hvac,
            self.wiring_loss.lighting,
            self.wiring_loss.interior_equipment,
            self.wiring_loss.water_heater,
            self.load_total,
            self.wiring_loss_total,
            self.bus_demand,
            self.pv_available,
            self.pv_curtailed,
            self.pv_input,
            self.pv_output,
            self.pv_loss,
            self.excess,
            self.battery_side_power,
            self.battery_bus_power,
            self.battery_loss,
            self.soc,
        ] {
            r.push(v.to_string());
        }
        r.push(u8::from(self.battery_disconnected).to_string());
        for v in [
            self.export_bus,
            self.export_grid,
            self.import_bus,
            self.import_grid,
            self.ac_dc_loss,
            self.total_loss(),
            self.conservation_residual,
        ] {
            r.push(v.to_string());
        }
        r
    }
}

/// Bus balance recomputed from a step's component flows.
pub fn bus_balance_residual(s: &StepResult) -> f64 {
    let discharge = (-s.battery_bus_power).max(0.0);
    let charge = s.battery_bus_power.max(0.0);
    (s.pv_output + discharge + s.import_bus) - (s.load_total + s.wiring_loss_total + charge + s.export_bus)
}

/// A scenario with its converter banks sized, ready to step.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    scenario: &'a Scenario,
    converters: ConverterSet,
}

impl<'a> Engine<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, EngineError> {
        let converters = scenario.converters()?;
        Ok(Self { scenario, converters })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn converters(&self) -> &ConverterSet {
        &self.converters
    }

    pub fn initial_state(&self) -> BatteryState {
        self.scenario.battery.initial_state()
    }

    /// Resolves the bus at step `t`.
    pub fn step(&self, t: usize, state: &BatteryState) -> Result<(StepResult, BatteryState), EngineError> {
        let sc = self.scenario;
        if t >= sc.steps() {
            return Err(EngineError::StepOutOfRange { t, len: sc.steps() });
        }
        let conv_err = |source| EngineError::Converter { t, source };

        let mut load = CategoryValues::default();
        let mut wiring = CategoryValues::default();
        for c in LoadCategory::ALL {
            let p = sc.loads.category(c).samples()[t];
            *load.get_mut(c) = p;
            *wiring.get_mut(c) = wiring_loss(&sc.wiring[c.index()], p, sc.bus_voltage);
        }
        let load_total = load.total();
        let wiring_loss_total = wiring.total();
        let bus_demand = load_total + wiring_loss_total;

        let pv_available = sc.pv.samples()[t];
        let pv_input = pv_available.min(self.converters.pv.total_nominal());
        let pv = self.converters.pv.convert_known_input(pv_input).map_err(conv_err)?;
        let excess = pv.output - bus_demand;

        let (action, next_state) = dispatch(state, &sc.battery, excess, self.converters.battery.as_ref(), sc.dt())
            .map_err(|source| EngineError::Battery { t, source })?;

        let residual = excess - action.bus_side_power;
        let mut export = Conversion::ZERO;
        let mut import = Conversion::ZERO;
        if residual > 0.0 {
            export = self.converters.ac_dc.convert_known_input(residual).map_err(conv_err)?;
        } else if residual < 0.0 {
            import = self.converters.ac_dc.convert_known_output(-residual).map_err(conv_err)?;
        }

        let mut step = StepResult {
            t,
            load,
            wiring_loss: wiring,
            load_total,
            wiring_loss_total,
            bus_demand,
            pv_available,
            pv_curtailed: pv_available - pv_input,
            pv_input,
            pv_output: pv.output,
            pv_loss: pv.loss,
            excess,
            battery_side_power: action.battery_side_power,
            battery_bus_power: action.bus_side_power,
            battery_loss: action.converter_loss,
            soc: next_state.soc,
            battery_disconnected: next_state.disconnected,
            export_bus: export.input,
            export_grid: export.output,
            import_bus: import.output,
            import_grid: import.input,
            ac_dc_loss: export.loss + import.loss,
            conservation_residual: 0.0,
        };
        step.conservation_residual = bus_balance_residual(&step);
        let scale = [pv.input, bus_demand, action.bus_side_power.abs(), export.input, import.input]
            .into_iter()
            .fold(1.0, f64::max);
        if step.conservation_residual.abs() > STEP_BALANCE_TOLERANCE * scale {
            return Err(EngineError::ConservationViolation {
                t,
                residual: step.conservation_residual,
            });
        }
        Ok((step, next_state))
    }
}

/// Functional form of [`Engine::step`].
pub fn simulate_step(
    engine: &Engine<'_>,
    t: usize,
    state: &BatteryState,
) -> Result<(StepResult, BatteryState), EngineError> {
    engine.step(t, state)
}

/// Annual energy totals, kWh.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTotals {
    pub load_total: f64,
    pub load: CategoryValues,
    pub pv_available: f64,
    pub pv_curtailed: f64,
    pub pv_input: f64,
    pub pv_output: f64,
    pub grid_import_grid_side: f64,
    pub grid_import_bus_side: f64,
    pub grid_export_bus_side: f64,
    pub grid_export_grid_side: f64,
    pub battery_charge: f64,
    pub battery_discharge: f64,
}

/// Loss energies by category, kWh.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pv_converter: f64,
    pub ac_dc_converter: f64,
    pub battery_converter: f64,
    pub wiring: f64,
    pub wiring_by_category: CategoryValues,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.pv_converter + self.ac_dc_converter + self.battery_converter + self.wiring
    }
}

/// Each loss as a percentage of total load energy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossShares {
    pub pv_converter: f64,
    pub ac_dc_converter: f64,
    pub battery_converter: f64,
    pub wiring: f64,
}

impl LossShares {
    pub fn sum(&self) -> f64 {
        self.pv_converter + self.ac_dc_converter + self.battery_converter + self.wiring
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub total_nominal_kw: f64,
    pub counts: [u64; 4],
    pub idle_steps: u64,
    pub over_nominal_steps: u64,
    pub shares_pct: [f64; 4],
    pub idle_pct: f64,
}

impl HistogramReport {
    fn new(h: &OperatingHistogram, total_nominal_kw: f64) -> Self {
        Self {
            total_nominal_kw,
            counts: h.bins,
            idle_steps: h.idle,
            over_nominal_steps: h.over_nominal,
            shares_pct: h.shares_pct(),
            idle_pct: h.idle_pct(),
        }
    }

    pub fn active_steps(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    pub pv: HistogramReport,
    pub ac_dc: HistogramReport,
    pub battery: HistogramReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterSizing {
    pub unit_nominal_kw: f64,
    pub parallel_count: u32,
    pub total_nominal_kw: f64,
}

impl From<&ConverterSpec> for ConverterSizing {
    fn from(c: &ConverterSpec) -> Self {
        Self {
            unit_nominal_kw: c.unit_nominal,
            parallel_count: c.parallel_count,
            total_nominal_kw: c.total_nominal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterSizings {
    pub pv: ConverterSizing,
    pub ac_dc: ConverterSizing,
    pub battery: Option<ConverterSizing>,
}

/// Results of one simulated horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualReport {
    pub label: String,
    pub bus_voltage: f64,
    pub steps: usize,
    pub dt_hours: f64,
    pub battery_capacity_kwh: f64,
    pub pv_scaling_factor: Option<f64>,
    pub converters: ConverterSizings,
    pub energy_kwh: EnergyTotals,
    pub losses_kwh: LossBreakdown,
    pub loss_shares_pct: LossShares,
    pub efficiency_pct: f64,
    pub bdt_hours: f64,
    pub initial_soc: f64,
    pub final_soc: f64,
    pub net_soc_change_kwh: f64,
    /// Sources minus sinks over the horizon, kWh.
    pub annual_balance_residual_kwh: f64,
    pub max_step_residual_kw: f64,
    pub histograms: Histograms,
}

/// Running totals over a simulation; [`compute_metrics`] turns them into a
/// report.
#[derive(Debug, Clone)]
pub struct Accumulator {
    label: String,
    bus_voltage: f64,
    dt: f64,
    capacity: f64,
    pv_scaling_factor: Option<f64>,
    converters: ConverterSizings,
    steps: usize,
    energy: EnergyTotals,
    losses: LossBreakdown,
    pv_hist: OperatingHistogram,
    ac_dc_hist: OperatingHistogram,
    battery_hist: OperatingHistogram,
    initial_soc: f64,
    state: BatteryState,
    max_step_residual: f64,
}

impl Accumulator {
    pub fn new(engine: &Engine<'_>) -> Self {
        let sc = engine.scenario();
        let c = engine.converters();
        let init = engine.initial_state();
        Self {
            label: sc.label.clone(),
            bus_voltage: sc.bus_voltage,
            dt: sc.dt(),
            capacity: sc.battery.capacity,
            pv_scaling_factor: sc.pv_scaling_factor,
            converters: ConverterSizings {
                pv: (&c.pv).into(),
                ac_dc: (&c.ac_dc).into(),
                battery: c.battery.as_ref().map(Into::into),
            },
            steps: 0,
            energy: EnergyTotals::default(),
            losses: LossBreakdown::default(),
            pv_hist: OperatingHistogram::default(),
            ac_dc_hist: OperatingHistogram::default(),
            battery_hist: OperatingHistogram::default(),
            initial_soc: init.soc,
            state: init,
            max_step_residual: 0.0,
        }
    }

    pub fn add(&mut self, step: &StepResult, state: &BatteryState) {
        let dt = self.dt;
        let e = &mut self.energy;
        e.load_total += step.load_total * dt;
        e.load.add_scaled(&step.load, dt);
        e.pv_available += step.pv_available * dt;
        e.pv_curtailed += step.pv_curtailed * dt;
        e.pv_input += step.pv_input * dt;
        e.pv_output += step.pv_output * dt;
        e.grid_import_grid_side += step.import_grid * dt;
        e.grid_import_bus_side += step.import_bus * dt;
        e.grid_export_bus_side += step.export_bus * dt;
        e.grid_export_grid_side += step.export_grid * dt;
        e.battery_charge += step.battery_side_power.max(0.0) * dt;
        e.battery_discharge += (-step.battery_side_power).max(0.0) * dt;

        let l = &mut self.losses;
        l.pv_converter += step.pv_loss * dt;
        l.ac_dc_converter += step.ac_dc_loss * dt;
        l.battery_converter += step.battery_loss * dt;
        l.wiring += step.wiring_loss_total * dt;
        l.wiring_by_category.add_scaled(&step.wiring_loss, dt);

        self.pv_hist
            .record(step.pv_input, self.converters.pv.total_nominal_kw);
        self.ac_dc_hist
            .record(step.export_bus + step.import_bus, self.converters.ac_dc.total_nominal_kw);
        if let Some(b) = &self.converters.battery {
            self.battery_hist
                .record(step.battery_side_power.abs(), b.total_nominal_kw);
        }

        self.max_step_residual = self.max_step_residual.max(step.conservation_residual.abs());
        self.state = *state;
        self.steps += 1;
    }
}

/// Loss shares of total load energy and the efficiency they imply.
pub fn compute_metrics(acc: Accumulator) -> Result<AnnualReport, EngineError> {
    let e = acc.energy;
    let l = acc.losses;
    if e.load_total <= 0.0 {
        return Err(EngineError::ZeroLoadYear);
    }
    let share = |x: f64| 100.0 * x / e.load_total;
    let shares = LossShares {
        pv_converter: share(l.pv_converter),
        ac_dc_converter: share(l.ac_dc_converter),
        battery_converter: share(l.battery_converter),
        wiring: share(l.wiring),
    };
    let efficiency_pct = 100.0 - shares.sum();

    let net_stored = (acc.state.soc - acc.initial_soc) * acc.capacity;
    let sources = e.pv_input + e.grid_import_grid_side;
    let sinks = e.load_total + e.grid_export_grid_side + l.total() + net_stored;
    let residual = sources - sinks;
    let throughput = sources.max(sinks).max(1.0);
    if residual.abs() > ANNUAL_BALANCE_TOLERANCE * throughput {
        return Err(EngineError::AnnualBalanceViolation { residual });
    }

    let battery_nominal = acc.converters.battery.map_or(0.0, |b| b.total_nominal_kw);
    Ok(AnnualReport {
        label: acc.label,
        bus_voltage: acc.bus_voltage,
        steps: acc.steps,
        dt_hours: acc.dt,
        battery_capacity_kwh: acc.capacity,
        pv_scaling_factor: acc.pv_scaling_factor,
        histograms: Histograms {
            pv: HistogramReport::new(&acc.pv_hist, acc.converters.pv.total_nominal_kw),
            ac_dc: HistogramReport::new(&acc.ac_dc_hist, acc.converters.ac_dc.total_nominal_kw),
            battery: HistogramReport::new(&acc.battery_hist, battery_nominal),
        },
        converters: acc.converters,
        energy_kwh: e,
        losses_kwh: l,
        loss_shares_pct: shares,
        efficiency_pct,
        bdt_hours: acc.state.bdt_hours,
        initial_soc: acc.initial_soc,
        final_soc: acc.state.soc,
        net_soc_change_kwh: net_stored,
        annual_balance_residual_kwh: residual,
        max_step_residual_kw: acc.max_step_residual,
    })
}

/// Runs every step of the scenario, handing each result to `observer`.
pub fn simulate_with<F>(scenario: &Scenario, mut observer: F) -> Result<AnnualReport, EngineError>
where
    F: FnMut(&StepResult, &BatteryState),
{
    let engine = Engine::new(scenario)?;
    let mut acc = Accumulator::new(&engine);
    let mut state = engine.initial_state();
    for t in 0..scenario.steps() {
        let (step, next) = engine.step(t, &state)?;
        observer(&step, &next);
        acc.add(&step, &next);
        state = next;
    }
    compute_metrics(acc)
}

/// Runs the whole horizon and returns the report.
pub fn simulate_year(scenario: &Scenario) -> Result<AnnualReport, EngineError> {
    simulate_with(scenario, |_, _| {})
}

/// Runs the whole horizon keeping every step.
pub fn simulate_with_trace(scenario: &Scenario) -> Result<(AnnualReport, Vec<StepResult>), EngineError> {
    let mut trace = Vec::with_capacity(scenario.steps());
    let report = simulate_with(scenario, |s, _| trace.push(*s))?;
    Ok((report, trace))
}
