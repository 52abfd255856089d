//! Configuration loading and the command-line front end.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixtures, scenario};
use nanogrid::config::{load_config, load_scenario, ConfigError, Mode};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_nanogrid");

fn nanogrid(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .env_remove("NANOGRID_FIXTURES")
        .output()
        .unwrap()
}

fn fixture(rel: &str) -> String {
    fixtures().join(rel).canonicalize().unwrap().display().to_string()
}

/// The minimal scenario with absolute paths and `edit` applied to its text.
fn minimal_variant(dir: &Path, edit: impl Fn(String) -> String) -> std::path::PathBuf {
    let text = std::fs::read_to_string(fixtures().join("scenarios/minimal.toml")).unwrap();
    let root = fixture(".");
    let text = edit(text.replace("\"../", &format!("\"{root}/")));
    let path = dir.join("variant.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn parse_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn minimal_config_takes_defaults() {
    let sc = scenario("minimal");
    assert_eq!(sc.label, "48V");
    assert_eq!(sc.bus_voltage, 48.0);
    assert!(sc.wiring.iter().all(|c| c.r_eq_mohm == 0.0));
    assert!(!sc.battery.is_present());
    assert!(sc.pv_scaling_factor.is_some());
    let conv = sc.converters().unwrap();
    assert!(conv.battery.is_none());
    let report = nanogrid::simulate_year(&sc).unwrap();
    assert_eq!(report.losses_kwh.wiring, 0.0);
    assert_eq!(report.losses_kwh.battery_converter, 0.0);
    assert_eq!(report.bdt_hours, 0.0);
}

#[test]
fn missing_voltage_is_reported_by_name() {
    let dir = TempDir::new().unwrap();
    let path = minimal_variant(dir.path(), |t| t.replace("bus_voltage = 48\n", ""));
    match load_scenario(&path) {
        Err(ConfigError::MissingField(f)) => assert_eq!(f, "bus_voltage"),
        other => panic!("expected missing bus_voltage, got {other:?}"),
    }
}

#[test]
fn zero_capacity_means_no_battery_converter() {
    let sc = scenario("toy").with_battery_capacity(0.0);
    assert!(sc.converters().unwrap().battery.is_none());
    let report = nanogrid::simulate_year(&sc).unwrap();
    assert!(report.converters.battery.is_none());
    assert_eq!(report.energy_kwh.battery_charge, 0.0);
}

#[test]
fn computed_wiring_scenario_loads() {
    let sc = scenario("computed_wiring_48v");
    assert!(sc.wiring.iter().all(|c| c.r_eq_mohm > 0.0));
    let report = nanogrid::simulate_year(&sc).unwrap();
    assert!(report.losses_kwh.wiring > 0.0);
}

#[test]
fn sweep_and_matrix_configs_load() {
    let sweep = load_config(&fixtures().join("sweep_low_48v.toml"), Mode::Sweep).unwrap();
    let caps = &sweep.sweep.unwrap().capacities_kwh;
    assert_eq!(caps.len(), 20);
    assert_eq!((caps[0], caps[19]), (2.4, 48.0));
    let matrix = load_config(&fixtures().join("matrix.toml"), Mode::Matrix).unwrap();
    let m = matrix.matrix.unwrap();
    assert_eq!(m.scenarios.len(), 6);
    assert!(m.scenario("high", 220.0).is_some());
}

#[test]
fn simulate_writes_reports_that_add_up() {
    let out = TempDir::new().unwrap();
    let res = nanogrid(&["simulate", &fixture("scenarios/toy.toml"), "--trace"], out.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["summary.json", "losses.csv", "histograms.csv", "trace.csv", "run_meta.json"] {
        assert!(out.path().join(f).is_file(), "{f}");
    }

    let losses = parse_csv(&out.path().join("losses.csv"));
    assert_eq!(losses.len(), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    let shares: f64 = losses.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    let eff = summary["efficiency_pct"].as_f64().unwrap();
    assert!((eff + shares - 100.0).abs() <= 1e-9);

    let hist = parse_csv(&out.path().join("histograms.csv"));
    for conv in ["pv", "ac_dc", "battery"] {
        let sum: f64 = hist.iter().filter(|r| r[0] == conv).map(|r| r[2].parse::<f64>().unwrap()).sum();
        assert!((sum - 100.0).abs() <= 1e-6, "{conv}: {sum}");
    }

    let trace = parse_csv(&out.path().join("trace.csv"));
    assert_eq!(trace.len(), 24);
}

#[test]
fn simulate_summary_matches_golden() {
    let out = TempDir::new().unwrap();
    let res = nanogrid(&["simulate", &fixture("scenarios/toy.toml")], out.path());
    assert!(res.status.success());
    let got = std::fs::read(out.path().join("summary.json")).unwrap();
    let want = std::fs::read(fixtures().join("golden/toy_summary.json")).unwrap();
    assert!(got == want, "summary.json differs from the golden file");
}

#[test]
fn sweep_and_matrix_commands_write_outputs() {
    let out = TempDir::new().unwrap();
    let res = nanogrid(&["sweep", &fixture("sweep_low_48v.toml")], out.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let out2 = TempDir::new().unwrap();
    let res = nanogrid(&["matrix", &fixture("matrix.toml")], out2.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(std::fs::read_dir(out.path()).unwrap().count() >= 2);
    assert!(std::fs::read_dir(out2.path()).unwrap().count() >= 2);
}

#[test]
fn exit_codes_follow_error_kind() {
    let out = TempDir::new().unwrap();
    let dir = TempDir::new().unwrap();

    // configuration problems
    let res = nanogrid(&["simulate", "/nonexistent/config.toml"], out.path());
    assert_eq!(res.status.code(), Some(2));
    let path = minimal_variant(dir.path(), |t| t.replace("bus_voltage = 48\n", ""));
    let res = nanogrid(&["simulate", path.to_str().unwrap()], out.path());
    assert_eq!(res.status.code(), Some(2));
    let path = minimal_variant(dir.path(), |t| format!("colour = \"red\"\n{t}"));
    let res = nanogrid(&["simulate", path.to_str().unwrap()], out.path());
    assert_eq!(res.status.code(), Some(2));

    // data problem: profile shorter than the declared length
    let path = minimal_variant(dir.path(), |t| t.replace("length = 24", "length = 25"));
    let res = nanogrid(&["simulate", path.to_str().unwrap()], out.path());
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));

    // output directory blocked by a file
    let blocker = dir.path().join("blocked");
    std::fs::write(&blocker, "x").unwrap();
    let res = nanogrid(&["simulate", &fixture("scenarios/toy.toml")], &blocker);
    assert_eq!(res.status.code(), Some(1));
}
