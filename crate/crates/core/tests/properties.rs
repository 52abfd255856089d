//! Randomized invariants of the simulator.

mod common;

use common::{curve, relative_error, scenario, Builder};
use nanogrid::engine::{bus_balance_residual, simulate_with};
use nanogrid::profile::{parse_profile_csv, write_profile_csv, ScalingFactor};
use nanogrid::sweep::{battery_capacity_sweep, select_capacity_knee, SweepPoint};
use nanogrid::wiring::{equivalent_resistance, size_conductor, wiring_loss, AmpacityTable};
use nanogrid::{simulate_year, BatterySpec, BatteryState, Engine, LoadCategory, OperatingHistogram, TimeSeries, WiringCircuit};
use proptest::prelude::*;

fn kw_vec(len: usize, max: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..max, len)
}

fn random_day() -> impl Strategy<Value = Builder> {
    (
        prop::bool::ANY,
        [kw_vec(24, 4.0), kw_vec(24, 1.0), kw_vec(24, 2.0), kw_vec(24, 3.0)],
        kw_vec(24, 12.0),
        [0.0..100.0f64, 0.0..100.0, 0.0..100.0, 0.0..100.0],
        0.0..30.0f64,
        0.2..1.0f64,
    )
        .prop_map(|(low_voltage, mut loads, pv, r, capacity, soc)| {
            // keep at least some load in the year
            loads[0][0] += 0.1;
            let tag = if low_voltage { "48v" } else { "220v" };
            let mut b = Builder::new(if low_voltage { 48.0 } else { 220.0 }, loads, pv);
            b.r_eq_mohm = r;
            b.pv_curve = curve(&format!("pv_{tag}"));
            b.ac_dc_curve = curve(&format!("ac_dc_{tag}"));
            b.battery_curve = curve(&format!("battery_{tag}"));
            b.battery = BatterySpec {
                initial_soc: Some(soc),
                ..BatterySpec::with_capacity(capacity).unwrap()
            };
            b
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(samples in prop::collection::vec(0.0..50.0f64, 1..200)) {
        let series = TimeSeries::hourly(samples).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&series, &mut buf).unwrap();
        let back = parse_profile_csv(buf.as_slice(), series.len()).unwrap();
        prop_assert_eq!(back.samples(), series.samples());
    }

    #[test]
    fn pv_scaling_round_trip(samples in prop::collection::vec(0.0..50.0f64, 1..200), k in 0.01..100.0f64) {
        let series = TimeSeries::hourly(samples).unwrap();
        let back = series.scaled(k).unwrap().scaled(1.0 / k).unwrap();
        for (a, b) in back.samples().iter().zip(series.samples()) {
            prop_assert!(relative_error(*a, *b) <= 1e-12);
        }
        prop_assert!(ScalingFactor::new(k).is_ok());
    }

    #[test]
    fn equivalent_resistance_reproduces_item_losses(
        items in prop::collection::vec(0.01..1000.0f64, 1..50),
        current in 0.0..300.0f64,
    ) {
        let r_eq = equivalent_resistance(&items).unwrap();
        let share = current / items.len() as f64;
        let brute: f64 = items.iter().map(|r| r * share * share).sum();
        prop_assert!(relative_error(r_eq * current * current, brute) <= 1e-12);
    }

    #[test]
    fn wiring_loss_is_nonnegative_and_monotone(
        r in 0.0..200.0f64,
        p1 in 0.0..20.0f64,
        p2 in 0.0..20.0f64,
    ) {
        let c = WiringCircuit::direct(LoadCategory::Lighting, r).unwrap();
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        for v in [48.0, 220.0] {
            prop_assert!(wiring_loss(&c, lo, v) >= 0.0);
            prop_assert!(wiring_loss(&c, lo, v) <= wiring_loss(&c, hi, v));
        }
        // the higher bus voltage never loses more
        prop_assert!(wiring_loss(&c, hi, 220.0) <= wiring_loss(&c, hi, 48.0));
    }

    #[test]
    fn conductor_size_is_monotone_in_current(a in 0.0..60.0f64, b in 0.0..60.0f64) {
        let table = AmpacityTable::standard();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if let (Ok(s_lo), Ok(s_hi)) = (size_conductor(lo, 1.25, &table), size_conductor(hi, 1.25, &table)) {
            prop_assert!(s_lo <= s_hi);
        }
    }

    #[test]
    fn histogram_shares_sum_to_hundred(
        powers in prop::collection::vec(prop_oneof![Just(0.0), 0.0..15.0f64], 1..300),
        nominal in 1.0..12.0f64,
    ) {
        let mut h = OperatingHistogram::default();
        for p in &powers {
            h.record(*p, nominal);
        }
        prop_assert_eq!(h.total_steps(), powers.len() as u64);
        if h.active_steps() > 0 {
            prop_assert!((h.shares_pct().iter().sum::<f64>() - 100.0).abs() <= 1e-9);
        } else {
            prop_assert_eq!(h.shares_pct(), [0.0; 4]);
        }
    }

    #[test]
    fn every_step_balances_and_respects_battery_limits(b in random_day()) {
        let sc = b.build();
        let engine = Engine::new(&sc).unwrap();
        let spec = sc.battery;
        let mut state = engine.initial_state();
        for t in 0..sc.steps() {
            let (s, next) = engine.step(t, &state).unwrap();
            prop_assert!(bus_balance_residual(&s).abs() <= 1e-9);
            prop_assert!(next.soc >= spec.soc_min - 1e-12 && next.soc <= spec.soc_max + 1e-12);
            prop_assert!(s.battery_side_power.abs() <= spec.capacity / 4.0 + 1e-12);
            if s.battery_side_power > 0.0 {
                prop_assert!(s.excess > 0.0);
            }
            if s.battery_side_power < 0.0 {
                prop_assert!(s.excess < 0.0);
            }
            prop_assert!(next.bdt_hours >= state.bdt_hours);
            if next.bdt_hours > state.bdt_hours {
                prop_assert!(s.excess <= 0.0);
                prop_assert!(state.soc <= spec.soc_min + 1e-9);
            }
            state = next;
        }
    }

    #[test]
    fn steps_from_any_soc_balance(b in random_day(), socs in prop::collection::vec(0.2..1.0f64, 24)) {
        let sc = b.build();
        let engine = Engine::new(&sc).unwrap();
        for (t, soc) in socs.into_iter().enumerate() {
            let state = BatteryState { soc, disconnected: false, bdt_hours: 0.0 };
            let (s, _) = engine.step(t, &state).unwrap();
            prop_assert!(s.conservation_residual.abs() <= 1e-9);
        }
    }

    #[test]
    fn report_identity_holds(b in random_day()) {
        let report = simulate_year(&b.build()).unwrap();
        prop_assert!((report.efficiency_pct + report.loss_shares_pct.sum() - 100.0).abs() <= 1e-9);
        prop_assert!(report.annual_balance_residual_kwh.abs() <= 1e-6 * report.energy_kwh.load_total.max(1.0));
    }

    #[test]
    fn efficiency_is_scale_free_without_wiring(b in random_day(), alpha in 0.1..10.0f64) {
        // wiring loss is quadratic in current, so only lossless wiring scales
        let mut b = b;
        b.r_eq_mohm = [0.0; 4];
        let mut scaled = Builder::new(
            b.voltage,
            b.loads.clone().map(|v| v.into_iter().map(|x| x * alpha).collect()),
            b.pv.iter().map(|x| x * alpha).collect(),
        );
        scaled.pv_curve = b.pv_curve.clone();
        scaled.ac_dc_curve = b.ac_dc_curve.clone();
        scaled.battery_curve = b.battery_curve.clone();
        scaled.battery = BatterySpec { capacity: b.battery.capacity * alpha, ..b.battery };
        let a = simulate_year(&b.build()).unwrap();
        let s = simulate_year(&scaled.build()).unwrap();
        prop_assert!((a.efficiency_pct - s.efficiency_pct).abs() <= 1e-9);
        prop_assert_eq!(a.bdt_hours, s.bdt_hours);
    }

    #[test]
    fn knee_is_one_of_the_inputs(bdt in prop::collection::vec(0.0..500.0f64, 2..20), slope in 0.1..10.0f64) {
        let points: Vec<SweepPoint> = bdt
            .iter()
            .enumerate()
            .map(|(i, &h)| SweepPoint { capacity: 2.4 * (i + 1) as f64, efficiency_pct: 80.0, bdt_hours: h })
            .collect();
        let knee = select_capacity_knee(&points, slope).unwrap();
        prop_assert!(points.iter().any(|p| p.capacity == knee.capacity));
        if knee.knee_found {
            let i = points.iter().position(|p| p.capacity == knee.capacity).unwrap();
            for w in points[i..].windows(2) {
                let s = (w[1].bdt_hours - w[0].bdt_hours) / (w[1].capacity - w[0].capacity);
                prop_assert!(s.abs() < slope);
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let sc = scenario("base_48v");
    let a = simulate_year(&sc).unwrap();
    let b = simulate_year(&sc).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn sweep_points_equal_direct_runs() {
    let sc = scenario("low_48v");
    let caps = [0.0, 4.8, 19.2];
    let points = battery_capacity_sweep(&sc, &caps).unwrap();
    for (p, &c) in points.iter().zip(&caps) {
        let direct = simulate_year(&sc.with_battery_capacity(c)).unwrap();
        assert_eq!(p.capacity, c);
        assert_eq!(p.efficiency_pct, direct.efficiency_pct);
        assert_eq!(p.bdt_hours, direct.bdt_hours);
    }
}

#[test]
fn annual_observer_sees_battery_rules() {
    let sc = scenario("base_220v").with_battery_capacity(9.6);
    let spec = sc.battery;
    let mut prev = BatteryState { soc: spec.initial_state().soc, disconnected: false, bdt_hours: 0.0 };
    simulate_with(&sc, |s, state| {
        assert!(state.soc >= spec.soc_min - 1e-12 && state.soc <= spec.soc_max + 1e-12);
        assert!(s.battery_side_power.abs() <= spec.capacity / 4.0 + 1e-12);
        assert!(state.bdt_hours >= prev.bdt_hours);
        if state.bdt_hours > prev.bdt_hours {
            assert!(s.excess <= 0.0 && prev.soc <= spec.soc_min + 1e-9);
        }
        prev = *state;
    })
    .unwrap();
}
