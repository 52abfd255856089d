//! TOML run configuration.
//!
//! One file fully determines a run. Relative paths are resolved against the
//! directory of the file that names them, falling back to the directory in
//! `NANOGRID_FIXTURES` when set. A scenario file looks like:
//!
//! ```toml
//! label = "low_48v"
//! bus_voltage = 48
//!
//! [profiles]
//! loads = "profiles/low_load.csv"   # or hvac/lighting/interior_equipment/water_heater
//! pv = "profiles/pv_plant.csv"
//! length = 8760                      # default
//! pv_scaling = "zero_net_energy"     # default; or "none", or pv_k = <number>
//!
//! [wiring]
//! hvac = { r_eq_mohm = 21.35 }
//! lighting = { runs = [{ run_length_m = 6.0, items = 4 }] }
//!
//! [converters.pv]
//! curve = "curves/pv_48v.csv"
//! unit_nominal_kw = 1.0
//!
//! [battery]
//! capacity_kwh = 19.2
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::battery::BatterySpec;
use crate::converter::EfficiencyCurve;
use crate::profile::{
    apply_pv_scaling, parse_load_profile_csv, parse_profile_csv, pv_scaling_factor, LoadCategory, LoadProfile,
    ProfileError, ScalingFactor, TimeSeries, HOURS_PER_YEAR,
};
use crate::scenario::{ConverterDesign, Scenario};
use crate::sweep::{capacity_range, DEFAULT_KNEE_SLOPE, DEFAULT_MODULE_KWH};
use crate::wiring::{
    scale_resistance_by_area, size_conductor, wire_resistance, AmpacityTable, ResistanceSource, WireRun,
    WiringCircuit, COPPER_RESISTIVITY, DEFAULT_SAFETY_FACTOR,
};

/// Environment variable naming a fallback directory for relative input paths.
pub const FIXTURES_ENV: &str = "NANOGRID_FIXTURES";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("cannot parse {}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {source}", .path.display())]
    Profile {
        path: PathBuf,
        #[source]
        source: ProfileError,
    },
    #[error("{}: {message}", .path.display())]
    Data { path: PathBuf, message: String },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    /// Whether the problem is with input data files rather than the
    /// configuration itself.
    pub fn is_data_error(&self) -> bool {
        matches!(self, ConfigError::Profile { .. } | ConfigError::Data { .. })
    }

    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::InvalidValue {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    label: Option<String>,
    bus_voltage: Option<f64>,
    profiles: Option<RawProfiles>,
    #[serde(default)]
    wiring: RawWiring,
    #[serde(default)]
    converters: RawConverters,
    #[serde(default)]
    battery: RawBattery,
    sweep: Option<RawSweep>,
    matrix: Option<RawMatrix>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfiles {
    loads: Option<String>,
    hvac: Option<String>,
    lighting: Option<String>,
    interior_equipment: Option<String>,
    water_heater: Option<String>,
    pv: Option<String>,
    length: Option<usize>,
    pv_scaling: Option<String>,
    pv_k: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWiring {
    safety_factor: Option<f64>,
    ampacity_table: Option<String>,
    resistivity_ohm_m: Option<f64>,
    hvac: Option<RawCircuit>,
    lighting: Option<RawCircuit>,
    interior_equipment: Option<RawCircuit>,
    water_heater: Option<RawCircuit>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    r_eq_mohm: Option<f64>,
    runs: Option<Vec<RawRun>>,
    cross_section_mm2: Option<f64>,
    area_ratio: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    run_length_m: f64,
    #[serde(default = "one")]
    items: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverters {
    pv: Option<RawConverter>,
    ac_dc: Option<RawConverter>,
    battery: Option<RawConverter>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverter {
    curve: Option<String>,
    unit_nominal_kw: Option<f64>,
    parallel_count: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBattery {
    capacity_kwh: Option<f64>,
    soc_min: Option<f64>,
    soc_max: Option<f64>,
    c_rate_divisor: Option<f64>,
    initial_soc: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    capacities_kwh: Option<Vec<f64>>,
    start_kwh: Option<f64>,
    stop_kwh: Option<f64>,
    step_kwh: Option<f64>,
    knee_slope_h_per_kwh: Option<f64>,
    module_kwh: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    load_models: Option<Vec<String>>,
    voltages: Option<Vec<f64>>,
    battery: Option<Vec<bool>>,
    scenario_template: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    Sweep,
    Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub capacities_kwh: Vec<f64>,
    pub knee_slope_h_per_kwh: f64,
    pub module_kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConfig {
    pub load_models: Vec<String>,
    pub voltages: Vec<f64>,
    pub battery: Vec<bool>,
    /// Validated scenario for each (load model, voltage) pair, keyed by both.
    pub scenarios: BTreeMap<(String, u64), Scenario>,
}

impl MatrixConfig {
    pub fn scenario(&self, load_model: &str, voltage: f64) -> Option<&Scenario> {
        self.scenarios.get(&(load_model.to_string(), voltage.to_bits()))
    }
}

/// A fully validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub path: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub scenario: Option<Scenario>,
    pub sweep: Option<SweepConfig>,
    pub matrix: Option<MatrixConfig>,
}

struct Resolver {
    base: PathBuf,
    fallback: Option<PathBuf>,
}

impl Resolver {
    fn for_file(path: &Path) -> Self {
        Self {
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            fallback: std::env::var_os(FIXTURES_ENV).map(PathBuf::from),
        }
    }

    fn resolve(&self, rel: &str) -> Result<PathBuf, ConfigError> {
        let p = Path::new(rel);
        if p.is_absolute() {
            return if p.exists() {
                Ok(p.to_path_buf())
            } else {
                Err(ConfigError::FileNotFound(p.to_path_buf()))
            };
        }
        let primary = self.base.join(p);
        if primary.exists() {
            return Ok(primary);
        }
        if let Some(dir) = &self.fallback {
            let alt = dir.join(p);
            if alt.exists() {
                return Ok(alt);
            }
        }
        Err(ConfigError::FileNotFound(primary))
    }

    fn open(&self, rel: &str) -> Result<(PathBuf, File), ConfigError> {
        let path = self.resolve(rel)?;
        let file = File::open(&path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        Ok((path, file))
    }
}

fn read_raw(path: &Path) -> Result<RawConfig, ConfigError> {
    if !path.exists() {
        return Err(ConfigError::FileNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads and validates a run configuration for the given mode.
pub fn load_config(path: &Path, mode: Mode) -> Result<RunConfig, ConfigError> {
    let raw = read_raw(path)?;
    let resolver = Resolver::for_file(path);
    let output_dir = raw
        .output
        .as_ref()
        .and_then(|o| o.dir.as_ref())
        .map(|d| resolver.base.join(d));

    let mut run = RunConfig {
        mode,
        path: path.to_path_buf(),
        output_dir,
        scenario: None,
        sweep: None,
        matrix: None,
    };
    match mode {
        Mode::Single => {
            run.scenario = Some(build_scenario(&raw, &resolver)?);
        }
        Mode::Sweep => {
            run.scenario = Some(build_scenario(&raw, &resolver)?);
            run.sweep = Some(build_sweep(raw.sweep.as_ref())?);
        }
        Mode::Matrix => {
            let m = raw.matrix.as_ref().ok_or_else(|| ConfigError::MissingField("matrix".into()))?;
            run.matrix = Some(build_matrix(m, &resolver)?);
        }
    }
    Ok(run)
}

/// Loads a single scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let raw = read_raw(path)?;
    build_scenario(&raw, &Resolver::for_file(path))
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(field, format!("{v} must be positive")))
    }
}

fn read_series(resolver: &Resolver, rel: &str, len: usize) -> Result<TimeSeries, ConfigError> {
    let (path, file) = resolver.open(rel)?;
    parse_profile_csv(file, len).map_err(|source| ConfigError::Profile { path, source })
}

fn read_curve(resolver: &Resolver, field: &str, raw: Option<&RawConverter>) -> Result<ConverterDesign, ConfigError> {
    let raw = raw.ok_or_else(|| ConfigError::MissingField(field.into()))?;
    let curve_field = format!("{field}.curve");
    let rel = raw.curve.as_deref().ok_or(ConfigError::MissingField(curve_field))?;
    let (path, file) = resolver.open(rel)?;
    let curve = EfficiencyCurve::from_csv(file).map_err(|e| ConfigError::Data {
        path,
        message: e.to_string(),
    })?;
    if let Some(u) = raw.unit_nominal_kw {
        positive(&format!("{field}.unit_nominal_kw"), u)?;
    }
    if raw.parallel_count == Some(0) {
        return Err(ConfigError::invalid(format!("{field}.parallel_count"), "must be at least 1"));
    }
    if raw.parallel_count.is_some() && raw.unit_nominal_kw.is_none() && field != "converters.battery" {
        return Err(ConfigError::invalid(
            format!("{field}.parallel_count"),
            "an explicit unit count needs unit_nominal_kw",
        ));
    }
    Ok(ConverterDesign {
        curve,
        unit_nominal: raw.unit_nominal_kw,
        parallel_count: raw.parallel_count,
    })
}

fn build_scenario(raw: &RawConfig, resolver: &Resolver) -> Result<Scenario, ConfigError> {
    let bus_voltage = raw.bus_voltage.ok_or_else(|| ConfigError::MissingField("bus_voltage".into()))?;
    positive("bus_voltage", bus_voltage)?;
    let profiles = raw
        .profiles
        .as_ref()
        .ok_or_else(|| ConfigError::MissingField("profiles".into()))?;
    let len = profiles.length.unwrap_or(HOURS_PER_YEAR);
    if len == 0 {
        return Err(ConfigError::invalid("profiles.length", "must be at least 1"));
    }

    let loads = match (&profiles.loads, &profiles.hvac) {
        (Some(rel), None) => {
            let (path, file) = resolver.open(rel)?;
            parse_load_profile_csv(file, len).map_err(|source| ConfigError::Profile { path, source })?
        }
        (None, _) => {
            let get = |name: &str, v: &Option<String>| -> Result<TimeSeries, ConfigError> {
                let rel = v
                    .as_deref()
                    .ok_or_else(|| ConfigError::MissingField(format!("profiles.{name}")))?;
                read_series(resolver, rel, len)
            };
            LoadProfile::new(
                get("hvac", &profiles.hvac)?,
                get("lighting", &profiles.lighting)?,
                get("interior_equipment", &profiles.interior_equipment)?,
                get("water_heater", &profiles.water_heater)?,
            )
            .map_err(|e| ConfigError::invalid("profiles", e.to_string()))?
        }
        (Some(_), Some(_)) => {
            return Err(ConfigError::invalid(
                "profiles.loads",
                "give either a four-column loads file or per-category files, not both",
            ))
        }
    };

    let pv_rel = profiles
        .pv
        .as_deref()
        .ok_or_else(|| ConfigError::MissingField("profiles.pv".into()))?;
    let pv_raw = read_series(resolver, pv_rel, len)?;
    let k = match (profiles.pv_k, profiles.pv_scaling.as_deref()) {
        (Some(k), _) => Some(
            ScalingFactor::new(k).map_err(|e| ConfigError::invalid("profiles.pv_k", e.to_string()))?,
        ),
        (None, None | Some("zero_net_energy")) => Some(
            pv_scaling_factor(&pv_raw, &loads.total())
                .map_err(|e| ConfigError::invalid("profiles.pv_scaling", e.to_string()))?,
        ),
        (None, Some("none")) => None,
        (None, Some(other)) => {
            return Err(ConfigError::invalid(
                "profiles.pv_scaling",
                format!("unknown mode {other:?}; expected \"zero_net_energy\" or \"none\""),
            ))
        }
    };
    let pv = match k {
        Some(k) => apply_pv_scaling(&pv_raw, k),
        None => pv_raw,
    };

    let wiring = build_wiring(&raw.wiring, resolver, &loads, bus_voltage)?;

    let c = &raw.converters;
    let pv_converter = read_curve(resolver, "converters.pv", c.pv.as_ref())?;
    let ac_dc_converter = read_curve(resolver, "converters.ac_dc", c.ac_dc.as_ref())?;

    let b = &raw.battery;
    let defaults = BatterySpec::default();
    let battery = BatterySpec {
        capacity: b.capacity_kwh.unwrap_or(0.0),
        soc_min: b.soc_min.unwrap_or(defaults.soc_min),
        soc_max: b.soc_max.unwrap_or(defaults.soc_max),
        c_rate_divisor: b.c_rate_divisor.unwrap_or(defaults.c_rate_divisor),
        initial_soc: b.initial_soc,
    }
    .validated()
    .map_err(|e| ConfigError::invalid("battery", e.to_string()))?;
    let battery_converter = if battery.is_present() || c.battery.is_some() {
        read_curve(resolver, "converters.battery", c.battery.as_ref())?
    } else {
        ConverterDesign::new(EfficiencyCurve::ideal())
    };

    let scenario = Scenario {
        label: raw.label.clone().unwrap_or_else(|| format!("{bus_voltage}V")),
        bus_voltage,
        loads,
        pv,
        wiring,
        pv_converter,
        ac_dc_converter,
        battery_converter,
        battery,
        pv_scaling_factor: k.map(ScalingFactor::value),
    };
    scenario
        .validate()
        .map_err(|e| ConfigError::invalid("profiles", e.to_string()))?;
    Ok(scenario)
}

fn build_wiring(
    raw: &RawWiring,
    resolver: &Resolver,
    loads: &LoadProfile,
    bus_voltage: f64,
) -> Result<[WiringCircuit; 4], ConfigError> {
    let safety = raw.safety_factor.unwrap_or(DEFAULT_SAFETY_FACTOR);
    if !(safety.is_finite() && safety >= 1.0) {
        return Err(ConfigError::invalid("wiring.safety_factor", format!("{safety} must be ≥ 1")));
    }
    let resistivity = positive(
        "wiring.resistivity_ohm_m",
        raw.resistivity_ohm_m.unwrap_or(COPPER_RESISTIVITY),
    )?;
    let table = match &raw.ampacity_table {
        Some(rel) => {
            let (path, file) = resolver.open(rel)?;
            AmpacityTable::from_csv(file).map_err(|e| ConfigError::Data {
                path,
                message: e.to_string(),
            })?
        }
        None => AmpacityTable::standard(),
    };

    let mut out = Vec::with_capacity(4);
    for category in LoadCategory::ALL {
        let circuit = match category {
            LoadCategory::Hvac => &raw.hvac,
            LoadCategory::Lighting => &raw.lighting,
            LoadCategory::InteriorEquipment => &raw.interior_equipment,
            LoadCategory::WaterHeater => &raw.water_heater,
        };
        let field = format!("wiring.{}", category.name());
        let Some(c) = circuit else {
            out.push(WiringCircuit::direct(category, 0.0).expect("zero is valid"));
            continue;
        };
        let (r_eq, source) = match (c.r_eq_mohm, &c.runs) {
            (Some(r), None) => {
                if !(r.is_finite() && r >= 0.0) {
                    return Err(ConfigError::invalid(format!("{field}.r_eq_mohm"), format!("{r}")));
                }
                (r, ResistanceSource::DirectTable)
            }
            (None, Some(runs)) => {
                if runs.is_empty() || runs.iter().all(|r| r.items == 0) {
                    return Err(ConfigError::invalid(format!("{field}.runs"), "no items"));
                }
                let cross_section = match c.cross_section_mm2 {
                    Some(a) => positive(&format!("{field}.cross_section_mm2"), a)?,
                    None => {
                        let peak_current = loads.category(category).peak() * 1000.0 / bus_voltage;
                        size_conductor(peak_current, safety, &table)
                            .map_err(|e| ConfigError::invalid(field.clone(), e.to_string()))?
                    }
                };
                let mut items = Vec::new();
                for run in runs {
                    let wire = WireRun::new(run.run_length_m, cross_section, resistivity)
                        .map_err(|e| ConfigError::invalid(format!("{field}.runs"), e.to_string()))?;
                    let r = wire_resistance(&wire);
                    items.extend(std::iter::repeat_n(r, run.items as usize));
                }
                let r_eq_ohm = crate::wiring::equivalent_resistance(&items)
                    .map_err(|e| ConfigError::invalid(format!("{field}.runs"), e.to_string()))?;
                (r_eq_ohm * 1e3, ResistanceSource::Computed)
            }
            (None, None) => return Err(ConfigError::MissingField(format!("{field}.r_eq_mohm"))),
            (Some(_), Some(_)) => {
                return Err(ConfigError::invalid(field, "give either r_eq_mohm or runs, not both"))
            }
        };
        let r_eq = match c.area_ratio {
            Some(ratio) => scale_resistance_by_area(r_eq, ratio)
                .map_err(|e| ConfigError::invalid(format!("{field}.area_ratio"), e.to_string()))?,
            None => r_eq,
        };
        out.push(
            WiringCircuit::new(category, r_eq, source).map_err(|e| ConfigError::invalid(field, e.to_string()))?,
        );
    }
    Ok(out.try_into().expect("four categories"))
}

fn build_sweep(raw: Option<&RawSweep>) -> Result<SweepConfig, ConfigError> {
    let default = RawSweep::default();
    let raw = raw.unwrap_or(&default);
    let capacities_kwh = match &raw.capacities_kwh {
        Some(c) => c.clone(),
        None => {
            let start = raw.start_kwh.unwrap_or(2.4);
            let stop = raw.stop_kwh.unwrap_or(48.0);
            let step = positive("sweep.step_kwh", raw.step_kwh.unwrap_or(2.4))?;
            capacity_range(start, stop, step)
        }
    };
    if capacities_kwh.is_empty() {
        return Err(ConfigError::invalid("sweep.capacities_kwh", "no capacities"));
    }
    if let Some(c) = capacities_kwh.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(ConfigError::invalid("sweep.capacities_kwh", format!("{c} kWh")));
    }
    Ok(SweepConfig {
        capacities_kwh,
        knee_slope_h_per_kwh: positive(
            "sweep.knee_slope_h_per_kwh",
            raw.knee_slope_h_per_kwh.unwrap_or(DEFAULT_KNEE_SLOPE),
        )?,
        module_kwh: positive("sweep.module_kwh", raw.module_kwh.unwrap_or(DEFAULT_MODULE_KWH))?,
    })
}

/// Fills `{load}` and `{voltage}` in a scenario path template.
pub fn expand_template(template: &str, load_model: &str, voltage: f64) -> String {
    template
        .replace("{load}", load_model)
        .replace("{voltage}", &voltage.to_string())
}

fn build_matrix(raw: &RawMatrix, resolver: &Resolver) -> Result<MatrixConfig, ConfigError> {
    let load_models = raw
        .load_models
        .clone()
        .ok_or_else(|| ConfigError::MissingField("matrix.load_models".into()))?;
    let voltages = raw
        .voltages
        .clone()
        .ok_or_else(|| ConfigError::MissingField("matrix.voltages".into()))?;
    let battery = raw.battery.clone().unwrap_or_else(|| vec![false, true]);
    let template = raw
        .scenario_template
        .as_deref()
        .ok_or_else(|| ConfigError::MissingField("matrix.scenario_template".into()))?;
    for (name, empty) in [
        ("matrix.load_models", load_models.is_empty()),
        ("matrix.voltages", voltages.is_empty()),
        ("matrix.battery", battery.is_empty()),
    ] {
        if empty {
            return Err(ConfigError::invalid(name, "must not be empty"));
        }
    }
    let mut scenarios = BTreeMap::new();
    for model in &load_models {
        for &v in &voltages {
            positive("matrix.voltages", v)?;
            let path = resolver.resolve(&expand_template(template, model, v))?;
            let scenario = load_scenario(&path)?;
            if scenario.bus_voltage != v {
                return Err(ConfigError::invalid(
                    "matrix.voltages",
                    format!(
                        "{} declares bus_voltage {} but the matrix cell is {v} V",
                        path.display(),
                        scenario.bus_voltage
                    ),
                ));
            }
            scenarios.insert((model.clone(), v.to_bits()), scenario);
        }
    }
    Ok(MatrixConfig {
        load_models,
        voltages,
        battery,
        scenarios,
    })
}
