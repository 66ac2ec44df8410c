use std::path::Path;

use proptest::prelude::*;

use skyplan::model::{f_j, sinr, Emitter};
use skyplan::sca::{run, ScaConfig};
use skyplan::scenario::{map1, map2, GroundStation, Scenario};
use skyplan::surrogate::{rebuild_kinematics, TrajectoryIterate};
use skyplan::Vec2;

fn fixture(name: &str) -> Scenario<f64> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::from_file(p).expect("fixture parses")
}

#[test]
fn fixtures_match_bundled_maps() {
    assert_eq!(fixture("map1.json"), map1());
    assert_eq!(fixture("map2.json"), map2());
    assert_eq!(fixture("map1.json").fingerprint(), map1().fingerprint());
    assert_ne!(map1().fingerprint(), map2().fingerprint());
}

/// `min_v c1 v³ + c2/v` per slot, the smallest power any slot can draw.
fn per_slot_floor(s: &Scenario<f64>) -> f64 {
    let (c1, c2) = (s.vehicle.c1, s.vehicle.c2);
    let v = (c2 / (3.0 * c1)).powf(0.25);
    c1 * v.powi(3) + c2 / v
}

#[test]
fn small_fixture_solves_and_validates() {
    let s = fixture("small.json");
    let out = run(&s, &ScaConfig::default()).unwrap();
    assert!(out.converged);
    let v = &out.trace.validation;
    assert!(!v.connectivity_violated);
    assert!(v.min_serving_sinr >= s.gamma_min * (1.0 - 1e-3));
    assert!(v.endpoint_error_m <= 1e-6);
    assert!(v.kinematics_residual_m <= 1e-6);
    assert!(v.speed_margin >= -1e-6 && v.accel_margin >= -1e-6);
    let floor = per_slot_floor(&s) * s.n_slots() as f64;
    assert!(out.trace.totals.power_w_sum >= floor, "{} < {floor}", out.trace.totals.power_w_sum);
    assert!((out.trace.totals.energy_j - out.trace.totals.power_w_sum * s.timing.slot_t_c).abs() < 1e-9);
    // Recompute each slot's SINR from the trace.
    let emitters = s.emitters();
    for r in &out.trace.slots[1..] {
        let j = r.serving_gbs.unwrap() - 1;
        let q = Vec2::from_array(r.position);
        let want = sinr(q, j, &emitters, s.vehicle.altitude_h).sinr;
        assert!((r.sinr.unwrap() - want).abs() <= 1e-12 * want.max(1.0));
    }
}

#[test]
fn power_grows_with_the_threshold_on_the_small_fixture() {
    let mut s = fixture("small.json");
    let mut last = 0.0;
    for g in [0.5, 1.0, 1.5, 2.0] {
        s.gamma_min = g;
        let p = run(&s, &ScaConfig::default()).unwrap().trace.totals.power_w_sum;
        assert!(p >= last - 1e-6 * last, "γ = {g}: {p} < {last}");
        last = p;
    }
}

fn scenario_with(stations: &[(f64, f64, f64)]) -> Scenario<f64> {
    let mut s = map1();
    s.stations = stations
        .iter()
        .enumerate()
        .map(|(i, &(x, y, db))| GroundStation::new(i + 1, Vec2::new(x, y), db))
        .collect();
    s
}

proptest! {
    #[test]
    fn sinr_is_unchanged_by_length_scaling(
        st in prop::collection::vec((-500.0..500.0f64, -500.0..500.0f64, 30.0..90.0f64), 1..6),
        qx in -600.0..600.0f64,
        qy in -600.0..600.0f64,
        scale in 1.0..1000.0f64,
    ) {
        let mut s = scenario_with(&st);
        s.length_scale = scale;
        let sc = s.nondimensionalize();
        let q = Vec2::new(qx, qy);
        for j in 0..st.len() {
            let a = sinr(q, j, &s.emitters(), s.vehicle.altitude_h).sinr;
            let b = sinr(q * scale.recip(), j, &sc.emitters, sc.altitude).sinr;
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
        }
    }

    #[test]
    fn f_j_is_midpoint_concave(
        h in prop::collection::vec(1e-2..1e6f64, 2..8),
        r1 in prop::collection::vec(0.1..1e3f64, 8),
        r2 in prop::collection::vec(0.1..1e3f64, 8),
        jj in 0usize..8,
    ) {
        let m = h.len();
        let j = jj % m;
        let (a, b) = (&r1[..m], &r2[..m]);
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let lhs = f_j(&mid, j, &h).unwrap();
        let rhs = 0.5 * (f_j(a, j, &h).unwrap() + f_j(b, j, &h).unwrap());
        prop_assert!(lhs >= rhs - 1e-12);
    }

    #[test]
    fn rebuilt_kinematics_follow_the_recursions(
        acc in prop::collection::vec((-0.05..0.05f64, -0.05..0.05f64), 1..12),
        v0 in (-0.1..0.1f64, -0.1..0.1f64),
        goal in (-5.0..5.0f64, -5.0..5.0f64),
        tc in 0.5..10.0f64,
    ) {
        let mut it = TrajectoryIterate {
            q: vec![],
            v: vec![],
            a: acc.iter().map(|&(x, y)| Vec2::new(x, y)).collect(),
            alpha: vec![],
            theta: vec![],
            rho: vec![],
        };
        let (q0, v0, goal) = (Vec2::zero(), Vec2::new(v0.0, v0.1), Vec2::new(goal.0, goal.1));
        rebuild_kinematics(&mut it, q0, v0, goal, tc);
        prop_assert_eq!(it.q[0], q0);
        prop_assert_eq!(it.v[0], v0);
        prop_assert_eq!(*it.q.last().unwrap(), goal);
        for n in 0..acc.len() {
            let q = it.q[n] + it.v[n] * tc + it.a[n] * (0.5 * tc * tc);
            let v = it.v[n] + it.a[n] * tc;
            prop_assert!((q - it.q[n + 1]).norm() <= 1e-9 * (1.0 + q.norm()));
            prop_assert!((v - it.v[n + 1]).norm() <= 1e-12 * (1.0 + v.norm()));
        }
    }

    #[test]
    fn best_station_maximizes_sinr(
        st in prop::collection::vec((-500.0..500.0f64, -500.0..500.0f64, 30.0..90.0f64), 1..6),
        qx in -600.0..600.0f64,
        qy in -600.0..600.0f64,
    ) {
        let emitters: Vec<Emitter<f64>> = st
            .iter()
            .map(|&(x, y, db)| Emitter { position: Vec2::new(x, y), gain: 10f64.powf(db / 10.0) })
            .collect();
        let q = Vec2::new(qx, qy);
        let best = skyplan::model::best_station(q, &emitters, 50.0).unwrap();
        for j in 0..emitters.len() {
            prop_assert!(sinr(q, j, &emitters, 50.0).sinr <= best.sinr * (1.0 + 1e-12));
        }
    }
}
