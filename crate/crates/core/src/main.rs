use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nanogrid::config::{load_config, ConfigError, Mode, RunConfig};
use nanogrid::engine::{simulate_with_trace, EngineError};
use nanogrid::report::{emit_matrix, emit_report, emit_sweep, emit_trace, write_run_meta, RunMeta};
use nanogrid::sweep::{snap_to_module, SweepError};
use nanogrid::{battery_capacity_sweep, scenario_matrix, select_capacity_knee, simulate_year};

#[derive(Parser)]
#[command(name = "nanogrid", version, about = "Residential DC nanogrid loss-accounting simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides [output].dir in the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write a per-step trace.csv (simulate only)
    #[arg(long, global = true)]
    trace: bool,
    /// Suppress the console summary
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario over its full horizon
    Simulate { config: PathBuf },
    /// Sweep battery capacity and select the downtime knee
    Sweep { config: PathBuf },
    /// Run the load model × voltage × battery matrix
    Matrix { config: PathBuf },
}

enum Failure {
    Config(ConfigError),
    Data(String),
    Invariant(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(e) if e.is_data_error() => 3,
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => e.to_string(),
            Failure::Data(m) | Failure::Invariant(m) | Failure::Io(m) => m.clone(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        if e.is_invariant_violation() {
            Failure::Invariant(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        let invariant = match &e {
            SweepError::Point { source, .. } => source.is_invariant_violation(),
            SweepError::Cell { source, .. } => source
                .downcast_ref::<EngineError>()
                .is_some_and(EngineError::is_invariant_violation),
            _ => false,
        };
        if invariant {
            Failure::Invariant(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<nanogrid::report::ReportError> for Failure {
    fn from(e: nanogrid::report::ReportError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn output_dir(cli: &Cli, run: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run_simulate(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let run = load_config(path, Mode::Single).map_err(Failure::Config)?;
    let scenario = run.scenario.as_ref().expect("single mode builds a scenario");
    let out = output_dir(cli, &run);
    let report = if cli.trace {
        let (report, steps) = simulate_with_trace(scenario)?;
        emit_trace(&steps, &out)?;
        report
    } else {
        simulate_year(scenario)?
    };
    emit_report(&report, &out)?;
    write_run_meta(&RunMeta::now("simulate", path), &out)?;
    if !cli.quiet {
        let s = &report.loss_shares_pct;
        println!("{}: efficiency {:.2} %", report.label, report.efficiency_pct);
        println!(
            "  losses (% of load): pv {:.2}  ac-dc {:.2}  battery {:.2}  wiring {:.2}",
            s.pv_converter, s.ac_dc_converter, s.battery_converter, s.wiring
        );
        println!("  battery downtime {} h", report.bdt_hours);
        println!("  reports in {}", out.display());
    }
    Ok(())
}

fn run_sweep(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let run = load_config(path, Mode::Sweep).map_err(Failure::Config)?;
    let scenario = run.scenario.as_ref().expect("sweep mode builds a scenario");
    let cfg = run.sweep.as_ref().expect("sweep mode builds sweep settings");
    let out = output_dir(cli, &run);
    let points = battery_capacity_sweep(scenario, &cfg.capacities_kwh)?;
    let knee = if points.len() >= 2 {
        let k = select_capacity_knee(&points, cfg.knee_slope_h_per_kwh)?;
        Some((k, snap_to_module(k.capacity, cfg.module_kwh)))
    } else {
        None
    };
    emit_sweep(&points, knee, cfg.knee_slope_h_per_kwh, cfg.module_kwh, &out)?;
    write_run_meta(&RunMeta::now("sweep", path), &out)?;
    if !cli.quiet {
        println!("{:>12} {:>14} {:>10}", "capacity_kWh", "efficiency_%", "BDT_h");
        for p in &points {
            println!("{:>12.2} {:>14.3} {:>10}", p.capacity, p.efficiency_pct, p.bdt_hours);
        }
        if let Some((k, selected)) = knee {
            let note = if k.knee_found { "" } else { " (no knee; largest capacity)" };
            println!("knee at {:.2} kWh{note}; selected {:.2} kWh", k.capacity, selected);
        }
        println!("reports in {}", out.display());
    }
    Ok(())
}

fn run_matrix(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let run = load_config(path, Mode::Matrix).map_err(Failure::Config)?;
    let m = run.matrix.as_ref().expect("matrix mode builds matrix settings");
    let out = output_dir(cli, &run);
    let cells = scenario_matrix(&m.load_models, &m.voltages, &m.battery, |model, v| {
        m.scenario(model, v)
            .cloned()
            .ok_or_else(|| ConfigError::MissingField(format!("scenario for {model} at {v} V")))
    })?;
    emit_matrix(&cells, &out)?;
    write_run_meta(&RunMeta::now("matrix", path), &out)?;
    if !cli.quiet {
        for c in &cells {
            println!("{:<28} {:>8.3} %", c.key(), c.report.efficiency_pct);
        }
        println!("reports in {}", out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config } => run_simulate(&cli, config),
        Command::Sweep { config } => run_sweep(&cli, config),
        Command::Matrix { config } => run_matrix(&cli, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
