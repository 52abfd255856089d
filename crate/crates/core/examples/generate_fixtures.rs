//! Regenerates the synthetic profiles under `fixtures/profiles`.
//!
//! Usage: `cargo run --example generate_fixtures -- [OUT_DIR] [SEED]`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use nanogrid::profile::{write_load_profile_csv, write_profile_csv, LoadCategory, LoadProfile};
use nanogrid::synthetic::{day_slice, load_year, pv_plant_year, LoadModel, DEFAULT_SEED};

/// Day of year used for the 24-step toy profiles.
const TOY_DAY: usize = 120;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/profiles"));
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(DEFAULT_SEED);
    std::fs::create_dir_all(&out)?;

    let pv = pv_plant_year(seed)?;
    write_profile_csv(&pv, BufWriter::new(File::create(out.join("pv_plant.csv"))?))?;
    println!("pv_plant.csv: {:.0} kWh", pv.energy());

    for model in LoadModel::ALL {
        let loads = load_year(model, seed)?;
        let name = format!("{}_load.csv", model.name());
        write_load_profile_csv(&loads, BufWriter::new(File::create(out.join(&name))?))?;
        println!("{name}: {:.0} kWh", loads.total().energy());
        if model == LoadModel::Low {
            let toy = LoadProfile::new(
                day_slice(&loads.hvac, TOY_DAY)?,
                day_slice(&loads.lighting, TOY_DAY)?,
                day_slice(&loads.interior_equipment, TOY_DAY)?,
                day_slice(&loads.water_heater, TOY_DAY)?,
            )?;
            write_load_profile_csv(&toy, BufWriter::new(File::create(out.join("toy_loads.csv"))?))?;
            for category in LoadCategory::ALL {
                let name = format!("toy_{}.csv", category.name());
                write_profile_csv(toy.category(category), BufWriter::new(File::create(out.join(name))?))?;
            }
            write_profile_csv(
                &day_slice(&pv, TOY_DAY)?,
                BufWriter::new(File::create(out.join("toy_pv.csv"))?),
            )?;
        }
    }
    Ok(())
}
