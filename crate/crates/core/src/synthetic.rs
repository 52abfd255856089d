//! Seeded generator for the synthetic fixture profiles shipped in
//! `fixtures/profiles`: a plant-scale PV year and three categorized house
//! load years (low, base, high consumption) for a hot-humid climate.
//!
//! Output is a pure function of the seed, so the checked-in files can be
//! regenerated bit-for-bit with `cargo run --example generate_fixtures`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::profile::{LoadProfile, ProfileError, TimeSeries, HOURS_PER_YEAR};

pub const DEFAULT_SEED: u64 = 20_210_614;

const LATITUDE_DEG: f64 = 28.5;

/// Rated output of the synthetic PV plant, kW.
pub const PLANT_PEAK_KW: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadModel {
    Low,
    Base,
    High,
}

impl LoadModel {
    pub const ALL: [LoadModel; 3] = [LoadModel::Low, LoadModel::Base, LoadModel::High];

    pub fn name(self) -> &'static str {
        match self {
            LoadModel::Low => "low",
            LoadModel::Base => "base",
            LoadModel::High => "high",
        }
    }

    pub fn params(self) -> HouseParams {
        match self {
            LoadModel::Low => HouseParams {
                cooling_kw_per_k: 0.10,
                heating_kw_per_k: 0.04,
                hvac_max_kw: 3.7,
                lighting_kw: 0.19,
                equipment_base_kw: 0.35,
                equipment_peak_kw: 0.59,
                water_heater_kw: 0.6,
            },
            LoadModel::Base => HouseParams {
                cooling_kw_per_k: 0.36,
                heating_kw_per_k: 0.22,
                hvac_max_kw: 7.0,
                lighting_kw: 0.6,
                equipment_base_kw: 0.38,
                equipment_peak_kw: 1.0,
                water_heater_kw: 1.5,
            },
            LoadModel::High => HouseParams {
                cooling_kw_per_k: 0.55,
                heating_kw_per_k: 0.34,
                hvac_max_kw: 9.0,
                lighting_kw: 0.85,
                equipment_base_kw: 0.55,
                equipment_peak_kw: 1.5,
                water_heater_kw: 2.0,
            },
        }
    }

    fn seed_offset(self) -> u64 {
        match self {
            LoadModel::Low => 201,
            LoadModel::Base => 2,
            LoadModel::High => 3,
        }
    }
}

/// Appliance ratings of a synthetic house.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HouseParams {
    pub cooling_kw_per_k: f64,
    pub heating_kw_per_k: f64,
    pub hvac_max_kw: f64,
    pub lighting_kw: f64,
    pub equipment_base_kw: f64,
    pub equipment_peak_kw: f64,
    pub water_heater_kw: f64,
}

fn declination_rad(day: usize) -> f64 {
    (23.45f64).to_radians() * (2.0 * PI * (284.0 + day as f64 + 1.0) / 365.0).sin()
}

/// Cosine of the solar zenith angle at the middle of hour `hour` (local
/// solar time).
fn cos_zenith(day: usize, hour: usize) -> f64 {
    let lat = LATITUDE_DEG.to_radians();
    let dec = declination_rad(day);
    let omega = (15.0 * (hour as f64 + 0.5 - 12.0)).to_radians();
    lat.sin() * dec.sin() + lat.cos() * dec.cos() * omega.cos()
}

fn sunset_hour(day: usize) -> f64 {
    let lat = LATITUDE_DEG.to_radians();
    let ws = (-(lat.tan() * declination_rad(day).tan())).acos();
    12.0 + ws.to_degrees() / 15.0
}

/// Outdoor dry-bulb temperature, °C.
fn ambient_temperature(day: usize, hour: usize, daily_offset: f64) -> f64 {
    let mean = 22.0 - 6.0 * (2.0 * PI * (day as f64 + 10.0) / 365.0).cos() + daily_offset;
    mean + 4.5 * (2.0 * PI * (hour as f64 - 15.0) / 24.0).cos()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sky {
    Clear,
    Partly,
    Overcast,
}

/// Daily sky state from a seasonal Markov chain.
fn sky_sequence(rng: &mut ChaCha8Rng) -> Vec<Sky> {
    let mut sky = Sky::Clear;
    (0..365)
        .map(|day| {
            // wet season peaks in early summer
            let wet = 0.5 - 0.5 * (2.0 * PI * (day as f64 + 30.0) / 365.0).cos();
            let u: f64 = rng.random();
            sky = match sky {
                Sky::Clear => {
                    if u < 0.62 - 0.1 * wet {
                        Sky::Clear
                    } else if u < 0.90 {
                        Sky::Partly
                    } else {
                        Sky::Overcast
                    }
                }
                Sky::Partly => {
                    if u < 0.40 {
                        Sky::Clear
                    } else if u < 0.82 {
                        Sky::Partly
                    } else {
                        Sky::Overcast
                    }
                }
                Sky::Overcast => {
                    if u < 0.25 {
                        Sky::Clear
                    } else if u < 0.65 {
                        Sky::Partly
                    } else {
                        Sky::Overcast
                    }
                }
            };
            sky
        })
        .collect()
}

/// Hourly plant output in kW for one year.
pub fn pv_plant_year(seed: u64) -> Result<TimeSeries, ProfileError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skies = sky_sequence(&mut rng);
    let mut samples = Vec::with_capacity(HOURS_PER_YEAR);
    for (day, sky) in skies.iter().enumerate() {
        let base_clearness = match sky {
            Sky::Clear => 0.86 + 0.08 * rng.random::<f64>(),
            Sky::Partly => 0.74 + 0.12 * rng.random::<f64>(),
            Sky::Overcast => 0.5 + 0.15 * rng.random::<f64>(),
        };
        let summer = (0.5 - 0.5 * (2.0 * PI * (day as f64 + 30.0) / 365.0).cos()).powi(2);
        for hour in 0..24 {
            let cz = cos_zenith(day, hour);
            if cz <= 0.0 {
                samples.push(0.0);
                continue;
            }
            let mut k = base_clearness;
            if *sky == Sky::Partly {
                k *= 0.75 + 0.5 * rng.random::<f64>();
            }
            // afternoon convective storms in summer
            if hour >= 14 && hour <= 17 && rng.random::<f64>() < 0.35 * summer {
                k *= 0.3 + 0.4 * rng.random::<f64>();
            }
            let p = PLANT_PEAK_KW * k.min(1.0) * cz.powf(1.15);
            samples.push((p * 1000.0).round() / 1000.0);
        }
    }
    TimeSeries::hourly(samples)
}

fn round_kw(v: f64) -> f64 {
    (v.max(0.0) * 10_000.0).round() / 10_000.0
}

/// Hourly categorized load for one year of the given house.
pub fn load_year(model: LoadModel, seed: u64) -> Result<LoadProfile, ProfileError> {
    house_load_year(&model.params(), seed.wrapping_add(model.seed_offset()))
}

/// Hourly categorized load for one year of a house with custom ratings.
pub fn house_load_year(p: &HouseParams, seed: u64) -> Result<LoadProfile, ProfileError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hvac = Vec::with_capacity(HOURS_PER_YEAR);
    let mut lighting = Vec::with_capacity(HOURS_PER_YEAR);
    let mut equipment = Vec::with_capacity(HOURS_PER_YEAR);
    let mut water = Vec::with_capacity(HOURS_PER_YEAR);

    for day in 0..365 {
        let weekend = day % 7 >= 5;
        let temp_offset = 2.0 * (rng.random::<f64>() - 0.5);
        let sunset = sunset_hour(day);
        let sunrise = 24.0 - sunset;
        for hour in 0..24 {
            let h = hour as f64 + 0.5;
            let occupied = weekend || !(9..17).contains(&hour);
            let asleep = hour < 6 || hour >= 23;

            let t = ambient_temperature(day, hour, temp_offset);
            let setpoint_cool = if occupied { 22.5 } else { 25.0 };
            let cooling = p.cooling_kw_per_k * (t - setpoint_cool).max(0.0);
            let heating = p.heating_kw_per_k * (15.0 - t).max(0.0);
            let cycling = 0.85 + 0.3 * rng.random::<f64>();
            hvac.push(round_kw(((cooling + heating) * cycling).min(p.hvac_max_kw)));

            let dark = h < sunrise + 0.5 || h > sunset - 0.5;
            let light = if asleep {
                0.05
            } else if dark {
                if h > sunset - 0.5 {
                    1.0
                } else {
                    0.6
                }
            } else if occupied {
                0.15
            } else {
                0.05
            };
            lighting.push(round_kw(p.lighting_kw * light * (0.9 + 0.2 * rng.random::<f64>())));

            let activity = match hour {
                6..=8 => 0.6,
                17..=21 => 1.0,
                22 => 0.5,
                9..=16 if occupied => 0.45,
                _ => 0.0,
            };
            equipment.push(round_kw(
                p.equipment_base_kw * (0.9 + 0.2 * rng.random::<f64>())
                    + p.equipment_peak_kw * activity * (0.7 + 0.6 * rng.random::<f64>()),
            ));

            let draw = match hour {
                6..=8 => 0.9,
                18..=20 => 0.7,
                12..=13 if weekend => 0.5,
                _ => 0.04,
            };
            let winter = 1.0 + 0.15 * (2.0 * PI * (day as f64 - 15.0) / 365.0).cos();
            let burst = if rng.random::<f64>() < 0.15 { 1.0 } else { 0.0 };
            water.push(round_kw(
                p.water_heater_kw * (draw * winter * (0.6 + 0.8 * rng.random::<f64>()) + 0.5 * burst * draw),
            ));
        }
    }
    LoadProfile::new(
        TimeSeries::hourly(hvac)?,
        TimeSeries::hourly(lighting)?,
        TimeSeries::hourly(equipment)?,
        TimeSeries::hourly(water)?,
    )
}

/// One day (24 steps) cut out of a year, starting at `day`.
pub fn day_slice(series: &TimeSeries, day: usize) -> Result<TimeSeries, ProfileError> {
    let start = day * 24;
    let end = start + 24;
    if end > series.len() {
        return Err(ProfileError::LengthMismatch {
            expected: end,
            found: series.len(),
        });
    }
    TimeSeries::new(series.samples()[start..end].to_vec(), series.dt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(pv_plant_year(7).unwrap(), pv_plant_year(7).unwrap());
        assert_eq!(load_year(LoadModel::Low, 7).unwrap(), load_year(LoadModel::Low, 7).unwrap());
        assert_ne!(pv_plant_year(7).unwrap(), pv_plant_year(8).unwrap());
    }

    #[test]
    fn pv_is_zero_at_night_and_bounded() {
        let pv = pv_plant_year(DEFAULT_SEED).unwrap();
        assert_eq!(pv.len(), HOURS_PER_YEAR);
        assert_eq!(pv.samples()[0], 0.0);
        assert_eq!(pv.samples()[23], 0.0);
        assert!(pv.peak() <= PLANT_PEAK_KW);
        assert!(pv.samples()[12] > 0.0);
    }

    #[test]
    fn larger_houses_use_more() {
        let e: Vec<f64> = LoadModel::ALL
            .iter()
            .map(|&m| load_year(m, DEFAULT_SEED).unwrap().total().energy())
            .collect();
        assert!(e[0] < e[1] && e[1] < e[2]);
    }
}
