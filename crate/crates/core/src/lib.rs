//! Hourly energy-flow and loss-accounting simulator for residential DC
//! nanogrids with PV, battery storage, a grid tie and four categorized load
//! circuits.
//!
//! The pipeline is: load and PV profiles ([`profile`]) feed a [`Scenario`]
//! with wiring ([`wiring`]), converter banks ([`converter`]) and a battery
//! ([`battery`]); [`engine`] steps the bus balance and folds the results into
//! an [`AnnualReport`]; [`sweep`] runs capacity sweeps and scenario matrices;
//! [`config`] and [`report`] handle files.

pub mod battery;
pub mod config;
pub mod converter;
pub mod engine;
pub mod profile;
pub mod report;
pub mod scenario;
pub mod sweep;
pub mod synthetic;
pub mod wiring;

pub use battery::{dispatch, BatteryAction, BatterySpec, BatteryState};
pub use converter::{ConverterRole, ConverterSpec, EfficiencyCurve, OperatingHistogram};
pub use engine::{compute_metrics, simulate_step, simulate_year, AnnualReport, Engine, EngineError, StepResult};
pub use profile::{LoadCategory, LoadProfile, TimeSeries};
pub use scenario::{ConverterDesign, Scenario};
pub use sweep::{battery_capacity_sweep, scenario_matrix, select_capacity_knee, SweepPoint};
pub use wiring::WiringCircuit;
