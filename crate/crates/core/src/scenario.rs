//! Problem instances: ground stations, vehicle parameters, timing and the
//! connectivity threshold, plus the JSON file format and the internal
//! length rescaling used by the optimizer.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::model::{Emitter, PowerParams};
use crate::scalar::Real;

pub const DEFAULT_LENGTH_SCALE_M: f64 = 100.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStation<T> {
    /// One-based station index.
    pub id: usize,
    pub position: Vec2<T>,
    /// Transmit power times reference channel gain over noise power, in dB.
    pub reference_snr_db: T,
}

impl<T: Real> GroundStation<T> {
    pub fn new(id: usize, position: Vec2<T>, reference_snr_db: T) -> Self {
        Self {
            id,
            position,
            reference_snr_db,
        }
    }

    /// Linear reference SNR, `10^(dB/10)`.
    pub fn reference_snr(&self) -> T {
        db_to_linear(self.reference_snr_db)
    }
}

pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

pub fn linear_to_db<T: Real>(x: T) -> T {
    T::lit(10.0) * x.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams<T> {
    /// Cubic-speed power coefficient, W·s³/m³.
    pub c1: T,
    /// Induced power coefficient, W·m/s.
    pub c2: T,
    pub gravity_g: T,
    pub altitude_h: T,
    pub v_max: T,
    pub a_max: T,
    pub v0: Vec2<T>,
}

impl<T: Real> VehicleParams<T> {
    pub fn power_params(&self) -> PowerParams<T> {
        PowerParams {
            c1: self.c1,
            c2: self.c2,
            g: self.gravity_g,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing<T> {
    pub total_time_t: T,
    pub slot_t_c: T,
    pub n_slots: usize,
}

impl<T: Real> Timing<T> {
    pub fn new(total_time_t: T, slot_t_c: T) -> Result<Self, ScenarioError> {
        if !(slot_t_c > T::zero()) || !slot_t_c.is_finite() {
            return invalid("slot_T_c must be positive");
        }
        if !(total_time_t >= slot_t_c) || !total_time_t.is_finite() {
            return invalid("total_time_T must be at least slot_T_c");
        }
        // Guard against T/T_c landing a hair above an integer.
        let ratio = (total_time_t / slot_t_c).to_f64_lossy();
        let n = (ratio - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            total_time_t,
            slot_t_c,
            n_slots: n,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub stations: Vec<GroundStation<T>>,
    pub vehicle: VehicleParams<T>,
    pub timing: Timing<T>,
    pub q_start: Vec2<T>,
    pub q_final: Vec2<T>,
    /// Linear SINR threshold.
    pub gamma_min: T,
    pub penalty_lambda: T,
    /// Internal nondimensionalization unit, metres.
    pub length_scale: T,
}

impl<T: Real> Scenario<T> {
    pub fn n_slots(&self) -> usize {
        self.timing.n_slots
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    /// Maximum distance covered in one slot, `v_max · T_c`.
    pub fn max_slot_distance(&self) -> T {
        self.vehicle.v_max * self.timing.slot_t_c
    }

    pub fn emitters(&self) -> Vec<Emitter<T>> {
        self.stations
            .iter()
            .map(|s| Emitter {
                position: s.position,
                gain: s.reference_snr(),
            })
            .collect()
    }

    /// Checks every invariant; returns the first violation.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let v = &self.vehicle;
        if self.stations.is_empty() {
            return invalid("at least one ground station is required");
        }
        for (i, s) in self.stations.iter().enumerate() {
            if s.id != i + 1 {
                return invalid(format!(
                    "station ids must be 1..J in order; found id {} at position {}",
                    s.id,
                    i + 1
                ));
            }
            if !s.position.is_finite() {
                return invalid(format!("station {} position must be finite", s.id));
            }
            if !s.reference_snr_db.is_finite() {
                return invalid(format!("station {} reference_snr_db must be finite", s.id));
            }
        }
        for (i, a) in self.stations.iter().enumerate() {
            for b in &self.stations[i + 1..] {
                if a.position == b.position {
                    return invalid(format!(
                        "stations {} and {} share a position",
                        a.id, b.id
                    ));
                }
            }
        }
        let positive = [
            ("c1", v.c1),
            ("c2", v.c2),
            ("gravity_g", v.gravity_g),
            ("altitude_H", v.altitude_h),
            ("v_max", v.v_max),
            ("a_max", v.a_max),
        ];
        for (name, x) in positive {
            if !(x > T::zero()) || !x.is_finite() {
                return invalid(format!("{name} must be positive"));
            }
        }
        if !v.v0.is_finite() || v.v0.norm() > v.v_max {
            return invalid("initial velocity v0 must satisfy |v0| <= v_max");
        }
        if !(self.timing.slot_t_c > T::zero()) {
            return invalid("slot_T_c must be positive");
        }
        if !(self.timing.total_time_t >= self.timing.slot_t_c) {
            return invalid("total_time_T must be at least slot_T_c");
        }
        if self.timing.n_slots == 0 {
            return invalid("n_slots must be at least 1");
        }
        if !self.q_start.is_finite() || !self.q_final.is_finite() {
            return invalid("endpoints must be finite");
        }
        if !(self.gamma_min >= T::zero()) || !self.gamma_min.is_finite() {
            return invalid("gamma_min must be non-negative");
        }
        if !(self.penalty_lambda > T::zero()) || !self.penalty_lambda.is_finite() {
            return invalid("lambda must be positive");
        }
        if !(self.length_scale > T::zero()) || !self.length_scale.is_finite() {
            return invalid("length_scale must be positive");
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Scenario<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        Scenario {
            stations: self
                .stations
                .iter()
                .map(|s| GroundStation::new(s.id, s.position.cast(), c(s.reference_snr_db)))
                .collect(),
            vehicle: VehicleParams {
                c1: c(self.vehicle.c1),
                c2: c(self.vehicle.c2),
                gravity_g: c(self.vehicle.gravity_g),
                altitude_h: c(self.vehicle.altitude_h),
                v_max: c(self.vehicle.v_max),
                a_max: c(self.vehicle.a_max),
                v0: self.vehicle.v0.cast(),
            },
            timing: Timing {
                total_time_t: c(self.timing.total_time_t),
                slot_t_c: c(self.timing.slot_t_c),
                n_slots: self.timing.n_slots,
            },
            q_start: self.q_start.cast(),
            q_final: self.q_final.cast(),
            gamma_min: c(self.gamma_min),
            penalty_lambda: c(self.penalty_lambda),
            length_scale: c(self.length_scale),
        }
    }

    /// Divides all lengths by `length_scale` and rescales the gains so that
    /// every SINR and every power value is unchanged.
    pub fn nondimensionalize(&self) -> ScaledScenario<T> {
        let l = self.length_scale;
        let l2 = l * l;
        let v = &self.vehicle;
        ScaledScenario {
            station_ids: self.stations.iter().map(|s| s.id).collect(),
            emitters: self
                .stations
                .iter()
                .map(|s| Emitter {
                    position: s.position * l.recip(),
                    gain: s.reference_snr() / l2,
                })
                .collect(),
            power: PowerParams {
                c1: v.c1 * l2 * l,
                c2: v.c2 / l,
                g: v.gravity_g / l2,
            },
            altitude: v.altitude_h / l,
            v_max: v.v_max / l,
            a_max: v.a_max / l,
            v0: v.v0 * l.recip(),
            total_time: self.timing.total_time_t,
            slot: self.timing.slot_t_c,
            n_slots: self.timing.n_slots,
            q_start: self.q_start * l.recip(),
            q_final: self.q_final * l.recip(),
            gamma_min: self.gamma_min,
            penalty_lambda: self.penalty_lambda,
            length_scale: l,
        }
    }
}

/// Scenario in internal units: lengths divided by `length_scale`, time in
/// seconds, power in watts. Gains are `h / L²` so SINR is scale invariant.
/// The `g` entry of `power` is `g / L²`, the value that keeps the
/// `|a|²/g` term of the power model unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledScenario<T> {
    pub station_ids: Vec<usize>,
    pub emitters: Vec<Emitter<T>>,
    pub power: PowerParams<T>,
    pub altitude: T,
    pub v_max: T,
    pub a_max: T,
    pub v0: Vec2<T>,
    pub total_time: T,
    pub slot: T,
    pub n_slots: usize,
    pub q_start: Vec2<T>,
    pub q_final: Vec2<T>,
    pub gamma_min: T,
    pub penalty_lambda: T,
    pub length_scale: T,
}

impl<T: Real> ScaledScenario<T> {
    pub fn n_stations(&self) -> usize {
        self.emitters.len()
    }

    pub fn gains(&self) -> Vec<T> {
        self.emitters.iter().map(|e| e.gain).collect()
    }

    /// Inverse of [`Scenario::nondimensionalize`].
    pub fn rescale(&self) -> Scenario<T> {
        let l = self.length_scale;
        let l2 = l * l;
        Scenario {
            stations: self
                .station_ids
                .iter()
                .zip(&self.emitters)
                .map(|(&id, e)| GroundStation::new(id, e.position * l, linear_to_db(e.gain * l2)))
                .collect(),
            vehicle: VehicleParams {
                c1: self.power.c1 / (l2 * l),
                c2: self.power.c2 * l,
                gravity_g: self.power.g * l2,
                altitude_h: self.altitude * l,
                v_max: self.v_max * l,
                a_max: self.a_max * l,
                v0: self.v0 * l,
            },
            timing: Timing {
                total_time_t: self.total_time,
                slot_t_c: self.slot,
                n_slots: self.n_slots,
            },
            q_start: self.q_start * l,
            q_final: self.q_final * l,
            gamma_min: self.gamma_min,
            penalty_lambda: self.penalty_lambda,
            length_scale: l,
        }
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StationFile {
    id: usize,
    x_m: f64,
    y_m: f64,
    ref_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleFile {
    c1: f64,
    c2: f64,
    g: f64,
    altitude_m: f64,
    v_max: f64,
    a_max: f64,
    v0: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingFile {
    #[serde(rename = "T_s")]
    t_s: f64,
    #[serde(rename = "Tc_s")]
    tc_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndpointsFile {
    start: [f64; 2],
    #[serde(rename = "final")]
    final_: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    stations: Vec<StationFile>,
    vehicle: VehicleFile,
    timing: TimingFile,
    endpoints: EndpointsFile,
    gamma_min: f64,
    lambda: f64,
    #[serde(default = "default_length_scale")]
    length_scale_m: f64,
}

fn default_length_scale() -> f64 {
    DEFAULT_LENGTH_SCALE_M
}

impl Scenario<f64> {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        let mut stations: Vec<GroundStation<f64>> = file
            .stations
            .iter()
            .map(|s| GroundStation::new(s.id, Vec2::new(s.x_m, s.y_m), s.ref_snr_db))
            .collect();
        stations.sort_by_key(|s| s.id);
        let scenario = Scenario {
            stations,
            vehicle: VehicleParams {
                c1: file.vehicle.c1,
                c2: file.vehicle.c2,
                gravity_g: file.vehicle.g,
                altitude_h: file.vehicle.altitude_m,
                v_max: file.vehicle.v_max,
                a_max: file.vehicle.a_max,
                v0: Vec2::from_array(file.vehicle.v0),
            },
            timing: Timing::new(file.timing.t_s, file.timing.tc_s)?,
            q_start: Vec2::from_array(file.endpoints.start),
            q_final: Vec2::from_array(file.endpoints.final_),
            gamma_min: file.gamma_min,
            penalty_lambda: file.lambda,
            length_scale: file.length_scale_m,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    fn to_file_struct(&self) -> ScenarioFile {
        ScenarioFile {
            stations: self
                .stations
                .iter()
                .map(|s| StationFile {
                    id: s.id,
                    x_m: s.position.x,
                    y_m: s.position.y,
                    ref_snr_db: s.reference_snr_db,
                })
                .collect(),
            vehicle: VehicleFile {
                c1: self.vehicle.c1,
                c2: self.vehicle.c2,
                g: self.vehicle.gravity_g,
                altitude_m: self.vehicle.altitude_h,
                v_max: self.vehicle.v_max,
                a_max: self.vehicle.a_max,
                v0: self.vehicle.v0.to_array(),
            },
            timing: TimingFile {
                t_s: self.timing.total_time_t,
                tc_s: self.timing.slot_t_c,
            },
            endpoints: EndpointsFile {
                start: self.q_start.to_array(),
                final_: self.q_final.to_array(),
            },
            gamma_min: self.gamma_min,
            lambda: self.penalty_lambda,
            length_scale_m: self.length_scale,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_struct()).expect("scenario serializes")
    }

    /// Short hex digest of the canonical (compact) file representation.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(&self.to_file_struct()).expect("scenario serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Bundled maps

fn published_vehicle(v_max: f64) -> VehicleParams<f64> {
    VehicleParams {
        c1: 0.002,
        c2: 80.0,
        gravity_g: 10.0,
        altitude_h: 50.0,
        v_max,
        a_max: 5.0,
        v0: Vec2::new(2.0, 2.0),
    }
}

fn bundled(layout: &[(f64, f64)], v_max: f64, q_final: Vec2<f64>) -> Scenario<f64> {
    Scenario {
        stations: layout
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| GroundStation::new(i + 1, Vec2::new(x, y), 80.0))
            .collect(),
        vehicle: published_vehicle(v_max),
        timing: Timing::new(50.0, 5.0).expect("published timing is valid"),
        q_start: Vec2::new(0.0, 0.0),
        q_final,
        gamma_min: 2.0,
        penalty_lambda: 1e5,
        length_scale: DEFAULT_LENGTH_SCALE_M,
    }
}

/// Stand-in station layout for the five-station map.
///
/// At 80 dB every station is heard far beyond the area of interest, so the
/// regions with SINR ≥ 2 are interference-limited islands around each
/// station. Four stations lie along the start-to-goal corridor, spaced so a
/// chain of islands links start and goal; the fifth is far away and only
/// adds interference.
pub const MAP1_LAYOUT: [(f64, f64); 5] = [
    (-50.0, 0.0),
    (5.0, 140.0),
    (75.0, 245.0),
    (120.0, 380.0),
    (670.0, 985.0),
];

/// Stand-in station layout for the eight-station map: three corridor
/// stations and five distant ones.
pub const MAP2_LAYOUT: [(f64, f64); 8] = [
    (45.0, 20.0),
    (190.0, 30.0),
    (330.0, 10.0),
    (945.0, 940.0),
    (-465.0, 1000.0),
    (-955.0, -320.0),
    (150.0, -1200.0),
    (1325.0, -420.0),
];

pub fn map1() -> Scenario<f64> {
    bundled(&MAP1_LAYOUT, 15.0, Vec2::new(100.0, 400.0))
}

pub fn map2() -> Scenario<f64> {
    bundled(&MAP2_LAYOUT, 12.0, Vec2::new(400.0, 0.0))
}

/// The two bundled scenarios: `[map1, map2]`.
pub fn default_scenarios() -> Vec<Scenario<f64>> {
    vec![map1(), map2()]
}

/// Looks up a bundled scenario by name (`map1` or `map2`).
pub fn bundled_scenario(name: &str) -> Option<Scenario<f64>> {
    match name {
        "map1" | "map-1" | "1" => Some(map1()),
        "map2" | "map-2" | "2" => Some(map2()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bundled_maps_carry_published_constants() {
        let m1 = map1();
        assert_eq!(m1.n_stations(), 5);
        assert_eq!(m1.n_slots(), 10);
        assert_eq!(m1.vehicle.v_max, 15.0);
        assert_eq!(m1.vehicle.c1, 0.002);
        assert_eq!(m1.vehicle.c2, 80.0);
        assert_eq!(m1.vehicle.altitude_h, 50.0);
        assert_eq!(m1.vehicle.gravity_g, 10.0);
        assert_eq!(m1.vehicle.a_max, 5.0);
        assert_eq!(m1.vehicle.v0, Vec2::new(2.0, 2.0));
        assert_eq!(m1.penalty_lambda, 1e5);
        assert_eq!(m1.gamma_min, 2.0);
        assert_eq!(m1.q_final, Vec2::new(100.0, 400.0));
        let m2 = map2();
        assert_eq!(m2.n_stations(), 8);
        assert_eq!(m2.n_slots(), 10);
        assert_eq!(m2.vehicle.v_max, 12.0);
        assert_eq!(m2.q_start, Vec2::new(0.0, 0.0));
        assert_eq!(m2.q_final, Vec2::new(400.0, 0.0));
        for s in default_scenarios() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn reference_snr_conversion() {
        let s = GroundStation::new(1, Vec2::new(0.0, 0.0), 80.0f64);
        assert!((s.reference_snr() - 1e8).abs() <= 1e8 * 1e-14);
    }

    #[test]
    fn zero_slot_rejected() {
        let text = map1().to_json_string().replace("\"Tc_s\": 5.0", "\"Tc_s\": 0.0");
        let err = Scenario::from_json_str(&text).unwrap_err();
        assert!(err.to_string().contains("slot_T_c must be positive"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = map1()
            .to_json_string()
            .replace("\"gamma_min\"", "\"colour\": 1, \"gamma_min\"");
        assert!(matches!(
            Scenario::from_json_str(&text),
            Err(ScenarioError::Parse(_))
        ));
    }

    #[test]
    fn length_scale_defaults_to_100m() {
        let text = map1()
            .to_json_string()
            .replace(",\n  \"length_scale_m\": 100.0", "");
        assert!(!text.contains("length_scale_m"));
        assert_eq!(Scenario::from_json_str(&text).unwrap().length_scale, 100.0);
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            Scenario::from_json_str("{\"stations\": ["),
            Err(ScenarioError::Parse(_))
        ));
    }

    #[test]
    fn validation_names_violations() {
        let mut s = map1();
        s.vehicle.v0 = Vec2::new(20.0, 0.0);
        assert!(s.validate().unwrap_err().to_string().contains("v0"));
        let mut s = map1();
        s.stations[1].position = s.stations[0].position;
        assert!(s.validate().unwrap_err().to_string().contains("share a position"));
        let mut s = map1();
        s.penalty_lambda = 0.0;
        assert!(s.validate().unwrap_err().to_string().contains("lambda"));
        let mut s = map1();
        s.gamma_min = -1.0;
        assert!(s.validate().unwrap_err().to_string().contains("gamma_min"));
    }

    #[test]
    fn loiter_endpoints_are_allowed() {
        let mut s = map1();
        s.q_final = s.q_start;
        s.validate().unwrap();
    }

    #[test]
    fn scaling_examples() {
        let mut s = map1();
        s.stations[0].position = Vec2::new(400.0, 0.0);
        let sc = s.nondimensionalize();
        assert_eq!(sc.emitters[0].position, Vec2::new(4.0, 0.0));
        let h2 = sc.altitude * sc.altitude;
        assert!((h2 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn non_integer_horizon_rounds_up() {
        assert_eq!(Timing::new(51.0, 5.0).unwrap().n_slots, 11);
        assert_eq!(Timing::new(50.0, 5.0).unwrap().n_slots, 10);
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario<f64>> {
        (
            prop::collection::vec((-1e4..1e4f64, -1e4..1e4f64, 20.0..120.0f64), 1..6),
            (1e-4..1.0f64, 1.0..200.0f64, 5.0..20.0f64),
            (1.0..20.0f64, 1.0..10.0f64),
            (0.0..10.0f64, 1.0..1e6f64, 1.0..1000.0f64),
        )
            .prop_map(|(st, (c1, c2, vmax), (tc, ratio), (gamma, lambda, ls))| {
                let mut s = map1();
                s.stations = st
                    .iter()
                    .enumerate()
                    .map(|(i, &(x, y, db))| GroundStation::new(i + 1, Vec2::new(x + i as f64 * 1e-3, y), db))
                    .collect();
                s.vehicle.c1 = c1;
                s.vehicle.c2 = c2;
                s.vehicle.v_max = vmax;
                s.timing = Timing::new(tc * ratio, tc).unwrap();
                s.gamma_min = gamma;
                s.penalty_lambda = lambda;
                s.length_scale = ls;
                s
            })
    }

    proptest! {
        #[test]
        fn file_round_trip_is_identity(s in arb_scenario()) {
            let back = Scenario::from_json_str(&s.to_json_string()).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn rescale_inverts_nondimensionalize(s in arb_scenario()) {
            let back = s.nondimensionalize().rescale();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
            for (x, y) in back.stations.iter().zip(&s.stations) {
                prop_assert!(close(x.position.x, y.position.x) && close(x.position.y, y.position.y));
                prop_assert!(close(x.reference_snr_db, y.reference_snr_db));
            }
            let (a, b) = (&back.vehicle, &s.vehicle);
            for (x, y) in [(a.c1, b.c1), (a.c2, b.c2), (a.gravity_g, b.gravity_g),
                           (a.altitude_h, b.altitude_h), (a.v_max, b.v_max), (a.a_max, b.a_max),
                           (a.v0.x, b.v0.x), (a.v0.y, b.v0.y),
                           (back.q_final.x, s.q_final.x), (back.q_final.y, s.q_final.y)] {
                prop_assert!(close(x, y), "{} vs {}", x, y);
            }
            prop_assert_eq!(back.timing, s.timing.clone());
        }
    }
}
