use std::path::Path;

use log::{error, info, warn};
use serde_json::{json, Value};

use skyplan::feasibility::{circle_graph_check, grid_oracle_check, FeasibilityCertificate};
use skyplan::probes::{run_probes, ProbeFamily, ProbeOptions};
use skyplan::sca::{gamma_sweep, run, ScaConfig, ScaError};
use skyplan::scenario::{bundled_scenario, Scenario};

use crate::output::{convergence_csv, slots_csv, sweep_csv, trace_json, write_atomic};
use crate::{ScenarioArgs, SolveArgs, EXIT_CONNECTIVITY, EXIT_INFEASIBLE, EXIT_OK, EXIT_SELFTEST, EXIT_SOLVER, EXIT_USAGE};

fn load(args: &ScenarioArgs) -> Result<Scenario<f64>, u8> {
    let mut s = match (&args.scenario, &args.seed_layout) {
        (Some(path), _) => Scenario::from_file(path).map_err(|e| {
            error!("{e}");
            EXIT_USAGE
        })?,
        (None, Some(name)) => bundled_scenario(name).ok_or_else(|| {
            error!("unknown layout {name:?}; expected map1 or map2");
            EXIT_USAGE
        })?,
        (None, None) => {
            error!("give a scenario file or --seed-layout");
            return Err(EXIT_USAGE);
        }
    };
    if let Some(g) = args.gamma_min {
        s.gamma_min = g;
    }
    if let Some(l) = args.lambda {
        s.penalty_lambda = l;
    }
    s.validate().map_err(|e| {
        error!("{e}");
        EXIT_USAGE
    })?;
    Ok(s)
}

fn sca_config(args: &SolveArgs) -> Result<ScaConfig<f64>, u8> {
    let mut cfg = ScaConfig::default();
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iterations = m;
    }
    cfg.trust_region_m = args.trust_region;
    cfg.validate().map_err(|e| {
        error!("{e}");
        EXIT_USAGE
    })?;
    Ok(cfg)
}

fn write(out: &Path, name: &str, bytes: &[u8]) -> Result<String, u8> {
    let path = out.join(name);
    write_atomic(&path, bytes).map_err(|e| {
        error!("cannot write {}: {e}", path.display());
        EXIT_SOLVER
    })?;
    Ok(path.display().to_string())
}

fn certificate_json(c: &FeasibilityCertificate<f64>) -> Value {
    json!({
        "feasible": c.feasible,
        "method": c.method,
        "association": c.association.as_ref().map(|a| a.one_based()),
        "waypoints_m": c.waypoints.as_ref().map(|w| w.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>()),
        "interference_bound": c.interference_bound,
        "min_true_sinr": c.min_true_sinr,
        "max_chord_deviation_m": c.max_chord_deviation(),
        "note": c.note,
    })
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("values serialize"));
}

pub fn plan(sa: &ScenarioArgs, solve: &SolveArgs, out: &Path) -> u8 {
    let (s, cfg) = match (load(sa), sca_config(solve)) {
        (Ok(s), Ok(c)) => (s, c),
        (Err(e), _) | (_, Err(e)) => return e,
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        error!("cannot create {}: {e}", out.display());
        return EXIT_SOLVER;
    }
    let outcome = match run(&s, &cfg) {
        Ok(o) => o,
        Err(ScaError::Infeasible(cert)) => {
            error!("scenario is infeasible: {}", cert.note);
            print_json(&json!({ "exit": EXIT_INFEASIBLE, "feasibility": certificate_json(&cert) }));
            return EXIT_INFEASIBLE;
        }
        Err(e @ (ScaError::Invalid(_) | ScaError::Config(_))) => {
            error!("{e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            error!("{e}");
            if !e.reports().is_empty() {
                let _ = write(out, "convergence.csv", &convergence_csv(e.reports()));
            }
            print_json(&json!({ "exit": EXIT_SOLVER, "error": e.to_string() }));
            return EXIT_SOLVER;
        }
    };
    let files = (|| {
        Ok::<_, u8>([
            write(out, "trace.json", trace_json(&outcome.trace).as_bytes())?,
            write(out, "slots.csv", &slots_csv(&outcome.trace))?,
            write(out, "convergence.csv", &convergence_csv(&outcome.reports))?,
        ])
    })();
    let files = match files {
        Ok(f) => f,
        Err(code) => return code,
    };
    let v = &outcome.trace.validation;
    let kinematics_ok = v.speed_margin >= -1e-6 && v.accel_margin >= -1e-6;
    let code = if v.connectivity_violated {
        warn!("rounded trajectory violates the SINR threshold (min {:.6})", v.min_serving_sinr);
        EXIT_CONNECTIVITY
    } else if !outcome.converged || !kinematics_ok {
        warn!("no converged valid trajectory after {} iterations", outcome.reports.len());
        EXIT_SOLVER
    } else {
        EXIT_OK
    };
    info!("plan finished with exit code {code}");
    print_json(&json!({
        "exit": code,
        "converged": outcome.converged,
        "iterations": outcome.trace.iterations,
        "total_power_W": outcome.trace.totals.power_w_sum,
        "energy_J": outcome.trace.totals.energy_j,
        "validation": v,
        "files": files,
    }));
    code
}

pub fn check(sa: &ScenarioArgs, oracle: bool, grid_step: f64) -> u8 {
    let s = match load(sa) {
        Ok(s) => s,
        Err(e) => return e,
    };
    let circle = circle_graph_check(&s, 0.0);
    if !oracle {
        print_json(&certificate_json(&circle));
        return if circle.feasible { EXIT_OK } else { EXIT_INFEASIBLE };
    }
    let grid = match grid_oracle_check(&s, grid_step) {
        Ok(g) => g,
        Err(e) => {
            error!("grid oracle: {e}");
            return EXIT_USAGE;
        }
    };
    let agreement = circle.feasible == grid.feasible;
    if !agreement {
        warn!("circle graph and grid oracle disagree");
    }
    print_json(&json!({
        "circle_graph": certificate_json(&circle),
        "grid_oracle": certificate_json(&grid),
        "agreement": agreement,
    }));
    if circle.feasible && grid.feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    }
}

pub fn sweep(sa: &ScenarioArgs, solve: &SolveArgs, gammas: &[f64], out: &Path) -> u8 {
    if gammas.is_empty() {
        eprintln!("error: --gammas needs at least one value");
        return EXIT_USAGE;
    }
    if gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        eprintln!("error: thresholds must be finite and non-negative");
        return EXIT_USAGE;
    }
    let (s, cfg) = match (load(sa), sca_config(solve)) {
        (Ok(s), Ok(c)) => (s, c),
        (Err(e), _) | (_, Err(e)) => return e,
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        error!("cannot create {}: {e}", out.display());
        return EXIT_SOLVER;
    }
    let mut sorted = gammas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = match gamma_sweep(&s, &sorted, &cfg) {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return EXIT_USAGE;
        }
    };
    let path = match write(out, "sweep.csv", &sweep_csv(&rows)) {
        Ok(p) => p,
        Err(code) => return code,
    };
    // A row succeeds when it ends in a verdict: a solution or a proof of
    // infeasibility.
    let succeeded = rows.iter().filter(|r| r.total_power_w.is_some() || !r.feasible).count();
    for r in rows.iter().filter(|r| r.error.is_some()) {
        warn!("γ = {}: {}", r.gamma, r.error.as_deref().unwrap_or_default());
    }
    let code = if succeeded == 0 { EXIT_SOLVER } else { EXIT_OK };
    print_json(&json!({ "exit": code, "rows": rows.len(), "succeeded": succeeded, "file": path }));
    code
}

pub fn selftest(probes: &[String], seed: u64, inject_sign_error: bool) -> u8 {
    let families: Vec<ProbeFamily> = if probes.is_empty() {
        ProbeFamily::ALL.to_vec()
    } else {
        let mut f = Vec::new();
        for p in probes {
            match ProbeFamily::parse(p.trim()) {
                Some(x) => f.push(x),
                None => {
                    eprintln!("error: unknown probe family {p:?}; expected derivatives, concavity or surrogate");
                    return EXIT_USAGE;
                }
            }
        }
        f
    };
    let results = run_probes(
        &families,
        &ProbeOptions {
            seed,
            inject_sign_error,
        },
    );
    println!("{:<12} {:<26} {:>7} {:>12} {:>9}  result", "family", "probe", "samples", "worst", "tolerance");
    for r in &results {
        println!(
            "{:<12} {:<26} {:>7} {:>12.3e} {:>9.0e}  {}",
            r.family.name(),
            r.name,
            r.samples,
            r.worst,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
    if failed.is_empty() {
        return EXIT_OK;
    }
    for r in failed {
        eprintln!("FAILED {}/{}: {}", r.family.name(), r.name, r.detail);
    }
    EXIT_SELFTEST
}
