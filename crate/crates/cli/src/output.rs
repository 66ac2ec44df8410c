//! Trace, slot and convergence files. Every float goes through [`num`] so
//! the bytes depend only on the computed values.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use skyplan::sca::{SolveReport, SweepRow, TrajectoryTrace};

/// Twelve significant digits in exponent form; non-finite values become
/// `null`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "null".to_string()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_string(), num)
}

fn csv_num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.11e}"),
        _ => String::new(),
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

pub fn trace_json(t: &TrajectoryTrace) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"scenario_fingerprint\": {},", json_str(&t.scenario_fingerprint));
    s.push_str("  \"slots\": [\n");
    for (i, r) in t.slots.iter().enumerate() {
        let (ax, ay) = match r.acceleration {
            Some([x, y]) => (num(x), num(y)),
            None => ("null".into(), "null".into()),
        };
        let _ = write!(
            s,
            "    {{\"n\": {}, \"t_s\": {}, \"x_m\": {}, \"y_m\": {}, \"vx\": {}, \"vy\": {}, \"ax\": {}, \"ay\": {}, \"serving_gbs\": {}, \"sinr\": {}, \"power_W\": {}}}",
            r.n,
            num(r.t_s),
            num(r.position[0]),
            num(r.position[1]),
            num(r.velocity[0]),
            num(r.velocity[1]),
            ax,
            ay,
            r.serving_gbs.map_or_else(|| "null".to_string(), |g| g.to_string()),
            opt_num(r.sinr),
            opt_num(r.power_w),
        );
        s.push_str(if i + 1 < t.slots.len() { ",\n" } else { "\n" });
    }
    s.push_str("  ],\n");
    let _ = writeln!(
        s,
        "  \"totals\": {{\"power_W_sum\": {}, \"energy_J\": {}}},",
        num(t.totals.power_w_sum),
        num(t.totals.energy_j)
    );
    let v = &t.validation;
    let ambiguous: Vec<String> = v.ambiguous_slots.iter().map(|k| k.to_string()).collect();
    let _ = writeln!(
        s,
        "  \"validation\": {{\"min_serving_sinr\": {}, \"endpoint_error_m\": {}, \"connectivity_violated\": {}, \"speed_margin\": {}, \"accel_margin\": {}, \"kinematics_residual_m\": {}, \"ambiguous_slots\": [{}]}},",
        num(v.min_serving_sinr),
        num(v.endpoint_error_m),
        v.connectivity_violated,
        num(v.speed_margin),
        num(v.accel_margin),
        num(v.kinematics_residual_m),
        ambiguous.join(", "),
    );
    let _ = writeln!(s, "  \"iterations\": {}", t.iterations);
    s.push_str("}\n");
    s
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn slots_csv(t: &TrajectoryTrace) -> Vec<u8> {
    let header = ["n", "t_s", "x_m", "y_m", "vx", "vy", "ax", "ay", "serving_gbs", "sinr", "power_W"];
    let rows = t.slots.iter().map(|r| {
        vec![
            r.n.to_string(),
            csv_num(Some(r.t_s)),
            csv_num(Some(r.position[0])),
            csv_num(Some(r.position[1])),
            csv_num(Some(r.velocity[0])),
            csv_num(Some(r.velocity[1])),
            csv_num(r.acceleration.map(|a| a[0])),
            csv_num(r.acceleration.map(|a| a[1])),
            r.serving_gbs.map_or_else(String::new, |g| g.to_string()),
            csv_num(r.sinr),
            csv_num(r.power_w),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn convergence_csv(reports: &[SolveReport]) -> Vec<u8> {
    let header = [
        "iteration",
        "surrogate_obj",
        "exact_obj",
        "penalty_residual",
        "max_binary_gap",
        "wall_time",
        "power_W",
        "lambda",
        "step_fraction",
        "newton_iterations",
        "solver_status",
    ];
    let rows = reports.iter().map(|r| {
        vec![
            r.iteration.to_string(),
            csv_num(Some(r.surrogate_objective)),
            csv_num(Some(r.exact_penalized_objective)),
            csv_num(Some(r.penalty_residual)),
            csv_num(Some(r.max_binary_gap)),
            format!("{:.6}", r.wall_time_s),
            csv_num(Some(r.power_only)),
            csv_num(Some(r.lambda)),
            csv_num(Some(r.step_fraction)),
            r.newton_iterations.to_string(),
            r.solver_status.to_string(),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    let header = [
        "gamma",
        "total_power_W",
        "energy_J",
        "converged",
        "feasible",
        "iterations",
        "max_chord_deviation_m",
        "connectivity_violated",
        "error",
    ];
    let out = rows.iter().map(|r| {
        vec![
            csv_num(Some(r.gamma)),
            csv_num(r.total_power_w),
            csv_num(r.energy_j),
            r.converged.to_string(),
            r.feasible.to_string(),
            r.iterations.to_string(),
            csv_num(r.max_chord_deviation_m),
            r.connectivity_violated.map_or_else(String::new, |b| b.to_string()),
            r.error.clone().unwrap_or_default(),
        ]
    });
    csv_bytes(&header, out)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-1234.5678901234567), "-1.23456789012e3");
        assert_eq!(num(f64::NAN), "null");
        let back: f64 = num(0.1 + 0.2).parse().unwrap();
        assert!((back - 0.3).abs() < 1e-12);
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn csv_quotes_embedded_commas() {
        let row = SweepRow {
            gamma: 1.0,
            total_power_w: None,
            energy_j: None,
            converged: false,
            feasible: true,
            iterations: 0,
            max_chord_deviation_m: None,
            connectivity_violated: None,
            error: Some("failed, badly".into()),
        };
        let text = String::from_utf8(sweep_csv(&[row])).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with("\"failed, badly\""));
    }
}
