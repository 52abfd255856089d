//! Power conversion stages modeled by load-fraction efficiency curves.
//!
//! A stage is a bank of identical units sharing load equally, so the curve
//! is evaluated at throughput over the bank's aggregate nominal power. The
//! curve argument is always the fraction on the side whose power is known:
//! the input side when converting a known input, the output side when a
//! known demand must be met.

use std::io::Read;

use serde::{Deserialize, Serialize};

/// Relative slack allowed above aggregate nominal power before a conversion
/// is rejected as an overload.
const OVER_NOMINAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConverterError {
    #[error("invalid efficiency curve: {0}")]
    InvalidCurve(String),
    #[error("invalid converter: {0}")]
    InvalidSpec(String),
    #[error("{role} converter asked to process {power:.6} kW, above its {nominal:.6} kW rating")]
    OverNominal { role: ConverterRole, power: f64, nominal: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConverterRole {
    Pv,
    AcDc,
    Battery,
}

impl ConverterRole {
    pub const ALL: [ConverterRole; 3] = [ConverterRole::Pv, ConverterRole::AcDc, ConverterRole::Battery];

    pub fn name(self) -> &'static str {
        match self {
            ConverterRole::Pv => "pv",
            ConverterRole::AcDc => "ac_dc",
            ConverterRole::Battery => "battery",
        }
    }
}

impl std::fmt::Display for ConverterRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub load_fraction: f64,
    pub efficiency: f64,
}

/// Piecewise-linear efficiency versus load fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    points: Vec<CurvePoint>,
}

impl EfficiencyCurve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self, ConverterError> {
        if points.len() < 2 {
            return Err(ConverterError::InvalidCurve(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        for p in &points {
            if !(p.load_fraction > 0.0 && p.load_fraction <= 1.0) {
                return Err(ConverterError::InvalidCurve(format!(
                    "load fraction {} outside (0, 1]",
                    p.load_fraction
                )));
            }
            if !(p.efficiency > 0.0 && p.efficiency <= 1.0) {
                return Err(ConverterError::InvalidCurve(format!(
                    "efficiency {} outside (0, 1]",
                    p.efficiency
                )));
            }
        }
        if let Some(w) = points.windows(2).find(|w| w[1].load_fraction <= w[0].load_fraction) {
            return Err(ConverterError::InvalidCurve(format!(
                "load fractions not strictly increasing at {}",
                w[1].load_fraction
            )));
        }
        Ok(Self { points })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, ConverterError> {
        Self::new(
            pairs
                .iter()
                .map(|&(load_fraction, efficiency)| CurvePoint {
                    load_fraction,
                    efficiency,
                })
                .collect(),
        )
    }

    /// Constant efficiency at every load.
    pub fn flat(efficiency: f64) -> Result<Self, ConverterError> {
        Self::from_pairs(&[(0.5, efficiency), (1.0, efficiency)])
    }

    pub fn ideal() -> Self {
        Self::flat(1.0).expect("unit efficiency is valid")
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    /// Interpolated efficiency, clamped to the end points outside the
    /// tabulated range.
    pub fn efficiency_at(&self, load_fraction: f64) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if load_fraction <= first.load_fraction {
            return first.efficiency;
        }
        if load_fraction >= last.load_fraction {
            return last.efficiency;
        }
        // first index whose fraction is >= the query; 1..len-1 here
        let hi = self.points.partition_point(|p| p.load_fraction < load_fraction);
        let (a, b) = (self.points[hi - 1], self.points[hi]);
        if b.load_fraction == load_fraction {
            return b.efficiency;
        }
        let w = (load_fraction - a.load_fraction) / (b.load_fraction - a.load_fraction);
        a.efficiency + w * (b.efficiency - a.efficiency)
    }

    /// Reads a `load_fraction,efficiency` CSV with a header row.
    pub fn from_csv<R: Read>(source: R) -> Result<Self, ConverterError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let mut points = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| ConverterError::InvalidCurve(e.to_string()))?;
            let field = |j: usize| -> Result<f64, ConverterError> {
                record.get(j).and_then(|s| s.parse().ok()).ok_or_else(|| {
                    ConverterError::InvalidCurve(format!("row {} column {} is not numeric", i + 2, j + 1))
                })
            };
            points.push(CurvePoint {
                load_fraction: field(0)?,
                efficiency: field(1)?,
            });
        }
        Self::new(points)
    }
}

/// Units needed so that the bank covers `peak_power`; never fewer than one.
pub fn parallel_count(peak_power: f64, unit_nominal: f64) -> u32 {
    debug_assert!(unit_nominal > 0.0 && peak_power >= 0.0);
    let n = (peak_power / unit_nominal).ceil();
    if n < 1.0 {
        1
    } else {
        n as u32
    }
}

/// One conversion stage: `parallel_count` identical units of `unit_nominal` kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverterSpec {
    pub role: ConverterRole,
    pub unit_nominal: f64,
    pub parallel_count: u32,
    pub curve: EfficiencyCurve,
}

/// Power through a stage after a conversion step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub input: f64,
    pub output: f64,
    pub loss: f64,
}

impl Conversion {
    pub const ZERO: Conversion = Conversion {
        input: 0.0,
        output: 0.0,
        loss: 0.0,
    };
}

impl ConverterSpec {
    pub fn new(
        role: ConverterRole,
        unit_nominal: f64,
        parallel_count: u32,
        curve: EfficiencyCurve,
    ) -> Result<Self, ConverterError> {
        if !(unit_nominal.is_finite() && unit_nominal > 0.0) {
            return Err(ConverterError::InvalidSpec(format!(
                "{role} unit nominal power {unit_nominal} kW"
            )));
        }
        if parallel_count == 0 {
            return Err(ConverterError::InvalidSpec(format!("{role} parallel count 0")));
        }
        Ok(Self {
            role,
            unit_nominal,
            parallel_count,
            curve,
        })
    }

    /// Bank sized for `peak_power` from units of `unit_nominal`.
    pub fn sized_for(
        role: ConverterRole,
        unit_nominal: f64,
        peak_power: f64,
        curve: EfficiencyCurve,
    ) -> Result<Self, ConverterError> {
        if !(unit_nominal.is_finite() && unit_nominal > 0.0) {
            return Err(ConverterError::InvalidSpec(format!(
                "{role} unit nominal power {unit_nominal} kW"
            )));
        }
        Self::new(role, unit_nominal, parallel_count(peak_power, unit_nominal), curve)
    }

    pub fn total_nominal(&self) -> f64 {
        self.unit_nominal * self.parallel_count as f64
    }

    fn check_rating(&self, power: f64) -> Result<(), ConverterError> {
        let nominal = self.total_nominal();
        if power > nominal * (1.0 + OVER_NOMINAL_TOLERANCE) {
            return Err(ConverterError::OverNominal {
                role: self.role,
                power,
                nominal,
            });
        }
        Ok(())
    }

    /// Forward conversion of a known input power.
    pub fn convert_known_input(&self, input_power: f64) -> Result<Conversion, ConverterError> {
        debug_assert!(input_power >= 0.0);
        self.check_rating(input_power)?;
        if input_power <= 0.0 {
            return Ok(Conversion::ZERO);
        }
        let eta = self.curve.efficiency_at(input_power / self.total_nominal());
        let output = input_power * eta;
        Ok(Conversion {
            input: input_power,
            output,
            loss: input_power - output,
        })
    }

    /// Input power required to deliver a known output power.
    pub fn convert_known_output(&self, output_power: f64) -> Result<Conversion, ConverterError> {
        debug_assert!(output_power >= 0.0);
        self.check_rating(output_power)?;
        if output_power <= 0.0 {
            return Ok(Conversion::ZERO);
        }
        let eta = self.curve.efficiency_at(output_power / self.total_nominal());
        let input = output_power / eta;
        Ok(Conversion {
            input,
            output: output_power,
            loss: input - output_power,
        })
    }
}

/// Time spent in each quarter of a converter's aggregate nominal power.
///
/// Bins are `(0, 25%]`, `(25, 50%]`, `(50, 75%]` and `(75, 100%]`; zero-power
/// steps go to `idle` and are left out of the shares.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatingHistogram {
    pub bins: [u64; 4],
    pub idle: u64,
    /// Steps above nominal power, counted in the top bin as well.
    pub over_nominal: u64,
}

impl OperatingHistogram {
    pub fn record(&mut self, power: f64, total_nominal: f64) {
        debug_assert!(power >= 0.0);
        if power <= 0.0 {
            self.idle += 1;
            return;
        }
        let fraction = if total_nominal > 0.0 {
            power / total_nominal
        } else {
            f64::INFINITY
        };
        let bin = if fraction <= 0.25 {
            0
        } else if fraction <= 0.5 {
            1
        } else if fraction <= 0.75 {
            2
        } else {
            3
        };
        if fraction > 1.0 {
            self.over_nominal += 1;
        }
        self.bins[bin] += 1;
    }

    pub fn active_steps(&self) -> u64 {
        self.bins.iter().sum()
    }

    pub fn total_steps(&self) -> u64 {
        self.active_steps() + self.idle
    }

    /// Bin shares in percent of nonzero-power steps; all zero when the
    /// converter never ran.
    pub fn shares_pct(&self) -> [f64; 4] {
        let active = self.active_steps();
        if active == 0 {
            return [0.0; 4];
        }
        self.bins.map(|c| 100.0 * c as f64 / active as f64)
    }

    /// Idle steps in percent of all recorded steps.
    pub fn idle_pct(&self) -> f64 {
        let total = self.total_steps();
        if total == 0 {
            0.0
        } else {
            100.0 * self.idle as f64 / total as f64
        }
    }
}

/// Functional form of [`OperatingHistogram::record`].
pub fn record_operating_point(mut hist: OperatingHistogram, power: f64, total_nominal: f64) -> OperatingHistogram {
    hist.record(power, total_nominal);
    hist
}
