//! Hourly load and PV time series: CSV ingestion, validation and
//! zero-net-energy PV scaling.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// Number of hourly slots in a simulated year (no leap day, no DST).
pub const HOURS_PER_YEAR: usize = 8760;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProfileError {
    #[error("expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("negative power {value} kW at row {row}")]
    NegativeValue { row: usize, value: f64 },
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("non-finite power at index {index}")]
    NonFinite { index: usize },
    #[error("time series must not be empty")]
    Empty,
    #[error("timestep must be positive and finite, got {0}")]
    InvalidTimestep(f64),
    #[error("series are not aligned: {0}")]
    Misaligned(String),
    #[error("annual energy of the {0} series is zero")]
    ZeroEnergy(&'static str),
    #[error("scaling factor must be positive and finite, got {0}")]
    InvalidScalingFactor(f64),
}

/// Fixed-length series of average power values (kW) sampled every `dt` hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    dt: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self, ProfileError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ProfileError::InvalidTimestep(dt));
        }
        if samples.is_empty() {
            return Err(ProfileError::Empty);
        }
        for (index, &v) in samples.iter().enumerate() {
            if !v.is_finite() {
                return Err(ProfileError::NonFinite { index });
            }
            if v < 0.0 {
                return Err(ProfileError::NegativeValue { row: index, value: v });
            }
        }
        Ok(Self { samples, dt })
    }

    /// Hourly series (`dt = 1 h`).
    pub fn hourly(samples: Vec<f64>) -> Result<Self, ProfileError> {
        Self::new(samples, 1.0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_annual(&self) -> bool {
        self.samples.len() == HOURS_PER_YEAR && self.dt == 1.0
    }

    /// Energy over the whole series in kWh.
    pub fn energy(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }

    /// Multiplies every sample by a nonnegative factor.
    pub fn scaled(&self, factor: f64) -> Result<Self, ProfileError> {
        Self::new(self.samples.iter().map(|v| v * factor).collect(), self.dt)
    }

    fn aligned_with(&self, other: &TimeSeries) -> bool {
        self.samples.len() == other.samples.len() && self.dt == other.dt
    }
}

/// Load categories on the DC bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadCategory {
    Hvac,
    Lighting,
    InteriorEquipment,
    WaterHeater,
}

impl LoadCategory {
    pub const ALL: [LoadCategory; 4] = [
        LoadCategory::Hvac,
        LoadCategory::Lighting,
        LoadCategory::InteriorEquipment,
        LoadCategory::WaterHeater,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LoadCategory::Hvac => "hvac",
            LoadCategory::Lighting => "lighting",
            LoadCategory::InteriorEquipment => "interior_equipment",
            LoadCategory::WaterHeater => "water_heater",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The four categorized load series of one house.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub hvac: TimeSeries,
    pub lighting: TimeSeries,
    pub interior_equipment: TimeSeries,
    pub water_heater: TimeSeries,
}

impl LoadProfile {
    pub fn new(
        hvac: TimeSeries,
        lighting: TimeSeries,
        interior_equipment: TimeSeries,
        water_heater: TimeSeries,
    ) -> Result<Self, ProfileError> {
        for (name, s) in [
            ("lighting", &lighting),
            ("interior_equipment", &interior_equipment),
            ("water_heater", &water_heater),
        ] {
            if !hvac.aligned_with(s) {
                return Err(ProfileError::Misaligned(format!(
                    "{name} has {} samples at dt={} h, hvac has {} at dt={} h",
                    s.len(),
                    s.dt(),
                    hvac.len(),
                    hvac.dt()
                )));
            }
        }
        Ok(Self {
            hvac,
            lighting,
            interior_equipment,
            water_heater,
        })
    }

    pub fn category(&self, category: LoadCategory) -> &TimeSeries {
        match category {
            LoadCategory::Hvac => &self.hvac,
            LoadCategory::Lighting => &self.lighting,
            LoadCategory::InteriorEquipment => &self.interior_equipment,
            LoadCategory::WaterHeater => &self.water_heater,
        }
    }

    pub fn len(&self) -> usize {
        self.hvac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hvac.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.hvac.dt()
    }

    /// Sum of the four categories per timestep.
    pub fn total(&self) -> TimeSeries {
        let samples = (0..self.len())
            .map(|t| {
                LoadCategory::ALL
                    .iter()
                    .map(|&c| self.category(c).samples()[t])
                    .sum()
            })
            .collect();
        TimeSeries {
            samples,
            dt: self.dt(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, ProfileError> {
        LoadProfile::new(
            self.hvac.scaled(factor)?,
            self.lighting.scaled(factor)?,
            self.interior_equipment.scaled(factor)?,
            self.water_heater.scaled(factor)?,
        )
    }
}

/// Ratio of annual PV energy to annual load energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFactor(f64);

impl ScalingFactor {
    pub fn new(k: f64) -> Result<Self, ProfileError> {
        if k.is_finite() && k > 0.0 {
            Ok(Self(k))
        } else {
            Err(ProfileError::InvalidScalingFactor(k))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `k = Σ pv / Σ load`, the divisor that makes annual PV energy match
/// annual consumption.
pub fn pv_scaling_factor(pv: &TimeSeries, load_total: &TimeSeries) -> Result<ScalingFactor, ProfileError> {
    if !pv.aligned_with(load_total) {
        return Err(ProfileError::Misaligned(format!(
            "pv has {} samples, load has {}",
            pv.len(),
            load_total.len()
        )));
    }
    let pv_sum: f64 = pv.samples().iter().sum();
    let load_sum: f64 = load_total.samples().iter().sum();
    if pv_sum <= 0.0 {
        return Err(ProfileError::ZeroEnergy("pv"));
    }
    if load_sum <= 0.0 {
        return Err(ProfileError::ZeroEnergy("load"));
    }
    ScalingFactor::new(pv_sum / load_sum)
}

pub fn apply_pv_scaling(pv: &TimeSeries, k: ScalingFactor) -> TimeSeries {
    TimeSeries {
        samples: pv.samples().iter().map(|p| p / k.value()).collect(),
        dt: pv.dt(),
    }
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Reads data rows as `(hour_index, values...)`, enforcing the column count and
/// the `0..N-1` ascending index.
fn read_rows<R: Read>(source: R, value_columns: usize) -> Result<Vec<Vec<f64>>, ProfileError> {
    let mut reader = csv_reader(source);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record.map_err(|e| ProfileError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != value_columns + 1 {
            return Err(ProfileError::MalformedRow {
                row,
                reason: format!("expected {} columns, found {}", value_columns + 1, record.len()),
            });
        }
        let index: usize = record[0].parse().map_err(|_| ProfileError::MalformedRow {
            row,
            reason: format!("hour index {:?} is not a nonnegative integer", &record[0]),
        })?;
        if index != rows.len() {
            return Err(ProfileError::MalformedRow {
                row,
                reason: format!("hour index {index} out of sequence, expected {}", rows.len()),
            });
        }
        let mut values = Vec::with_capacity(value_columns);
        for cell in record.iter().skip(1) {
            let v: f64 = cell.parse().map_err(|_| ProfileError::MalformedRow {
                row,
                reason: format!("value {cell:?} is not numeric"),
            })?;
            if !v.is_finite() {
                return Err(ProfileError::MalformedRow {
                    row,
                    reason: format!("value {cell:?} is not finite"),
                });
            }
            if v < 0.0 {
                return Err(ProfileError::NegativeValue { row, value: v });
            }
            values.push(v);
        }
        rows.push(values);
    }
    Ok(rows)
}

/// Parses a two-column `hour_index,value_kW` CSV into an hourly series of
/// exactly `expected_len` samples.
pub fn parse_profile_csv<R: Read>(source: R, expected_len: usize) -> Result<TimeSeries, ProfileError> {
    let rows = read_rows(source, 1)?;
    if rows.len() != expected_len {
        return Err(ProfileError::LengthMismatch {
            expected: expected_len,
            found: rows.len(),
        });
    }
    TimeSeries::hourly(rows.into_iter().map(|r| r[0]).collect())
}

/// Parses a five-column CSV
/// `hour_index,hvac_kW,lighting_kW,interior_equipment_kW,water_heater_kW`.
pub fn parse_load_profile_csv<R: Read>(source: R, expected_len: usize) -> Result<LoadProfile, ProfileError> {
    let rows = read_rows(source, 4)?;
    if rows.len() != expected_len {
        return Err(ProfileError::LengthMismatch {
            expected: expected_len,
            found: rows.len(),
        });
    }
    let column = |c: usize| TimeSeries::hourly(rows.iter().map(|r| r[c]).collect());
    LoadProfile::new(column(0)?, column(1)?, column(2)?, column(3)?)
}

pub fn write_profile_csv<W: Write>(series: &TimeSeries, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["hour_index", "value_kW"])?;
    for (i, v) in series.samples().iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()
}

pub fn write_load_profile_csv<W: Write>(profile: &LoadProfile, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "hour_index",
        "hvac_kW",
        "lighting_kW",
        "interior_equipment_kW",
        "water_heater_kW",
    ])?;
    for t in 0..profile.len() {
        let mut record = vec![t.to_string()];
        record.extend(
            LoadCategory::ALL
                .iter()
                .map(|&c| profile.category(c).samples()[t].to_string()),
        );
        w.write_record(&record)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_file() {
        let ts = parse_profile_csv("h,p\n0,1.5\n1,2.0\n2,0.5".as_bytes(), 3).unwrap();
        assert_eq!(ts.samples(), &[1.5, 2.0, 0.5]);
        assert_eq!(ts.dt(), 1.0);
    }

    #[test]
    fn accepts_crlf() {
        let ts = parse_profile_csv("h,p\r\n0,1.5\r\n1,2.0\r\n".as_bytes(), 2).unwrap();
        assert_eq!(ts.samples(), &[1.5, 2.0]);
    }

    #[test]
    fn short_file_is_length_mismatch() {
        let mut text = String::from("hour_index,value_kW\n");
        for i in 0..8759 {
            text.push_str(&format!("{i},1.0\n"));
        }
        assert_eq!(
            parse_profile_csv(text.as_bytes(), HOURS_PER_YEAR),
            Err(ProfileError::LengthMismatch {
                expected: 8760,
                found: 8759
            })
        );
    }

    #[test]
    fn negative_value_rejected() {
        let text = "h,p\n0,1\n1,1\n2,1\n3,1\n4,-0.2\n";
        assert!(matches!(
            parse_profile_csv(text.as_bytes(), 5),
            Err(ProfileError::NegativeValue { value, .. }) if value == -0.2
        ));
    }

    #[test]
    fn non_numeric_cell_is_malformed() {
        let text = "h,p\n0,1\n1,abc\n";
        assert!(matches!(
            parse_profile_csv(text.as_bytes(), 2),
            Err(ProfileError::MalformedRow { row: 3, .. })
        ));
    }

    #[test]
    fn out_of_order_index_is_malformed() {
        let text = "h,p\n0,1\n2,1\n";
        assert!(matches!(
            parse_profile_csv(text.as_bytes(), 2),
            Err(ProfileError::MalformedRow { .. })
        ));
    }

    #[test]
    fn four_column_profile() {
        let text = "h,a,b,c,d\n0,1,2,3,4\n1,0.5,0,0,0\n";
        let p = parse_load_profile_csv(text.as_bytes(), 2).unwrap();
        assert_eq!(p.water_heater.samples(), &[4.0, 0.0]);
        assert_eq!(p.total().samples(), &[10.0, 0.5]);
    }

    #[test]
    fn scaling_factor_examples() {
        let pv = TimeSeries::hourly(vec![2.0, 2.0]).unwrap();
        let load = TimeSeries::hourly(vec![1.0, 1.0]).unwrap();
        assert_eq!(pv_scaling_factor(&pv, &load).unwrap().value(), 2.0);
        assert_eq!(pv_scaling_factor(&load, &load).unwrap().value(), 1.0);
    }

    #[test]
    fn scaling_factor_zero_energy() {
        let pv = TimeSeries::hourly(vec![0.0, 0.0]).unwrap();
        let load = TimeSeries::hourly(vec![1.0, 1.0]).unwrap();
        assert_eq!(pv_scaling_factor(&pv, &load), Err(ProfileError::ZeroEnergy("pv")));
        assert_eq!(pv_scaling_factor(&load, &pv), Err(ProfileError::ZeroEnergy("load")));
    }

    #[test]
    fn apply_scaling_examples() {
        let pv = TimeSeries::hourly(vec![4.0, 2.0]).unwrap();
        let k = ScalingFactor::new(2.0).unwrap();
        assert_eq!(apply_pv_scaling(&pv, k).samples(), &[2.0, 1.0]);
        let one = ScalingFactor::new(1.0).unwrap();
        assert_eq!(apply_pv_scaling(&pv, one), pv);
    }

    #[test]
    fn construction_checks_invariants() {
        assert_eq!(TimeSeries::hourly(vec![]), Err(ProfileError::Empty));
        assert!(TimeSeries::hourly(vec![f64::NAN]).is_err());
        assert!(TimeSeries::new(vec![1.0], 0.0).is_err());
        assert!(ScalingFactor::new(0.0).is_err());
    }

    #[test]
    fn misaligned_profile_rejected() {
        let a = TimeSeries::hourly(vec![1.0, 2.0]).unwrap();
        let b = TimeSeries::hourly(vec![1.0]).unwrap();
        assert!(matches!(
            LoadProfile::new(a.clone(), a.clone(), a, b),
            Err(ProfileError::Misaligned(_))
        ));
    }
}
