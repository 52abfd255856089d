//! Branch-circuit wiring: conductor sizing, run resistance, per-category
//! equivalent resistance and I²R loss at the nominal bus voltage.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::profile::LoadCategory;

/// Annealed copper at 20 °C, Ω·m.
pub const COPPER_RESISTIVITY: f64 = 1.72e-8;

/// Ampacity headroom applied to a circuit's peak current when sizing it.
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WiringError {
    #[error("required ampacity {required_a:.3} A exceeds the largest table entry ({largest_a} A)")]
    CurrentExceedsTable { required_a: f64, largest_a: f64 },
    #[error("a category needs at least one item to form an equivalent resistance")]
    EmptyCategory,
    #[error("invalid wire run: {0}")]
    InvalidRun(String),
    #[error("invalid ampacity table: {0}")]
    InvalidTable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One conductor run from the panel to an item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireRun {
    /// One-way length in meters.
    pub run_length: f64,
    /// Conductor cross-section in mm².
    pub cross_section: f64,
    /// Resistivity in Ω·m.
    pub resistivity: f64,
}

impl WireRun {
    pub fn new(run_length: f64, cross_section: f64, resistivity: f64) -> Result<Self, WiringError> {
        if !(run_length.is_finite() && run_length >= 0.0) {
            return Err(WiringError::InvalidRun(format!("run length {run_length} m")));
        }
        if !(cross_section.is_finite() && cross_section > 0.0) {
            return Err(WiringError::InvalidRun(format!("cross-section {cross_section} mm²")));
        }
        if !(resistivity.is_finite() && resistivity > 0.0) {
            return Err(WiringError::InvalidRun(format!("resistivity {resistivity} Ω·m")));
        }
        Ok(Self {
            run_length,
            cross_section,
            resistivity,
        })
    }

    pub fn copper(run_length: f64, cross_section: f64) -> Result<Self, WiringError> {
        Self::new(run_length, cross_section, COPPER_RESISTIVITY)
    }
}

/// Resistance of a run in Ω, counting both supply and return conductors.
pub fn wire_resistance(run: &WireRun) -> f64 {
    run.resistivity * (2.0 * run.run_length) / (run.cross_section * 1e-6)
}

/// `Σ R_i / N²` over the N items of a category that share its current equally.
pub fn equivalent_resistance(items: &[f64]) -> Result<f64, WiringError> {
    if items.is_empty() {
        return Err(WiringError::EmptyCategory);
    }
    if let Some(r) = items.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(WiringError::InvalidArgument(format!("item resistance {r}")));
    }
    let n = items.len() as f64;
    Ok(items.iter().sum::<f64>() / (n * n))
}

/// Scales an equivalent resistance for a house whose floor area differs by
/// `area_ratio`; runs grow with the linear dimension, i.e. `sqrt(area_ratio)`.
pub fn scale_resistance_by_area(r_eq: f64, area_ratio: f64) -> Result<f64, WiringError> {
    if !(area_ratio.is_finite() && area_ratio > 0.0) {
        return Err(WiringError::InvalidArgument(format!("area ratio {area_ratio}")));
    }
    Ok(r_eq * area_ratio.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistanceSource {
    DirectTable,
    Computed,
}

/// Equivalent resistance of one load category's circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WiringCircuit {
    pub category: LoadCategory,
    /// Milliohms.
    pub r_eq_mohm: f64,
    pub source: ResistanceSource,
}

impl WiringCircuit {
    pub fn direct(category: LoadCategory, r_eq_mohm: f64) -> Result<Self, WiringError> {
        Self::new(category, r_eq_mohm, ResistanceSource::DirectTable)
    }

    pub fn new(category: LoadCategory, r_eq_mohm: f64, source: ResistanceSource) -> Result<Self, WiringError> {
        if !(r_eq_mohm.is_finite() && r_eq_mohm >= 0.0) {
            return Err(WiringError::InvalidArgument(format!(
                "{} equivalent resistance {r_eq_mohm} mΩ",
                category.name()
            )));
        }
        Ok(Self {
            category,
            r_eq_mohm,
            source,
        })
    }

    /// Builds a circuit from item runs: every item gets the same conductor
    /// size, chosen from the category's peak current.
    pub fn from_runs(
        category: LoadCategory,
        run_lengths_m: &[f64],
        cross_section_mm2: f64,
        resistivity: f64,
    ) -> Result<Self, WiringError> {
        let resistances = run_lengths_m
            .iter()
            .map(|&l| WireRun::new(l, cross_section_mm2, resistivity).map(|r| wire_resistance(&r)))
            .collect::<Result<Vec<_>, _>>()?;
        let r_eq = equivalent_resistance(&resistances)?;
        Self::new(category, r_eq * 1e3, ResistanceSource::Computed)
    }
}

/// Wiring loss in kW for a category drawing `category_power` kW from a bus
/// held at `bus_voltage` V.
pub fn wiring_loss(circuit: &WiringCircuit, category_power: f64, bus_voltage: f64) -> f64 {
    debug_assert!(category_power >= 0.0 && bus_voltage > 0.0);
    let current = category_power * 1000.0 / bus_voltage;
    circuit.r_eq_mohm * current * current / 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpacityEntry {
    pub cross_section_mm2: f64,
    pub max_current_a: f64,
}

/// Conductor sizes with their current ratings, strictly increasing in both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpacityTable {
    entries: Vec<AmpacityEntry>,
}

impl AmpacityTable {
    pub fn new(entries: Vec<AmpacityEntry>) -> Result<Self, WiringError> {
        if entries.is_empty() {
            return Err(WiringError::InvalidTable("table is empty".into()));
        }
        for e in &entries {
            if !(e.cross_section_mm2 > 0.0 && e.max_current_a > 0.0)
                || !e.cross_section_mm2.is_finite()
                || !e.max_current_a.is_finite()
            {
                return Err(WiringError::InvalidTable(format!(
                    "entry {} mm² / {} A is not positive",
                    e.cross_section_mm2, e.max_current_a
                )));
            }
        }
        for w in entries.windows(2) {
            if w[1].cross_section_mm2 <= w[0].cross_section_mm2 || w[1].max_current_a <= w[0].max_current_a {
                return Err(WiringError::InvalidTable(format!(
                    "entries not strictly increasing at {} mm²",
                    w[1].cross_section_mm2
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Small residential table: 1.5, 2.5, 4, 6 and 10 mm² copper.
    pub fn standard() -> Self {
        Self::new(
            [(1.5, 16.0), (2.5, 20.0), (4.0, 28.0), (6.0, 36.0), (10.0, 50.0)]
                .into_iter()
                .map(|(cross_section_mm2, max_current_a)| AmpacityEntry {
                    cross_section_mm2,
                    max_current_a,
                })
                .collect(),
        )
        .expect("built-in table is valid")
    }

    pub fn entries(&self) -> &[AmpacityEntry] {
        &self.entries
    }

    /// Reads a `cross_section_mm2,max_current_A` CSV with a header row.
    pub fn from_csv<R: Read>(source: R) -> Result<Self, WiringError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let mut entries = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| WiringError::InvalidTable(e.to_string()))?;
            let field = |j: usize| -> Result<f64, WiringError> {
                record
                    .get(j)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| WiringError::InvalidTable(format!("row {} column {} is not numeric", i + 2, j + 1)))
            };
            entries.push(AmpacityEntry {
                cross_section_mm2: field(0)?,
                max_current_a: field(1)?,
            });
        }
        Self::new(entries)
    }
}

/// Smallest cross-section whose ampacity covers `peak_current × safety_factor`.
pub fn size_conductor(peak_current: f64, safety_factor: f64, table: &AmpacityTable) -> Result<f64, WiringError> {
    if !(peak_current.is_finite() && peak_current >= 0.0) {
        return Err(WiringError::InvalidArgument(format!("peak current {peak_current} A")));
    }
    if !(safety_factor.is_finite() && safety_factor >= 1.0) {
        return Err(WiringError::InvalidArgument(format!("safety factor {safety_factor}")));
    }
    let required = peak_current * safety_factor;
    table
        .entries
        .iter()
        .find(|e| e.max_current_a >= required)
        .map(|e| e.cross_section_mm2)
        .ok_or(WiringError::CurrentExceedsTable {
            required_a: required,
            largest_a: table.entries.last().map_or(0.0, |e| e.max_current_a),
        })
}
