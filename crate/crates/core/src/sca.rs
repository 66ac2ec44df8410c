//! Successive convex approximation driver: repeatedly linearizes at the
//! current iterate, solves the convex subproblem, and keeps the new iterate
//! only once it is feasible for the original connectivity constraint.

use std::time::Instant;

use log::{debug, info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::feasibility::{
    certified_seed, circle_graph_check, seed_iterate, FeasibilityCertificate, FeasibilityError, InitConfig,
    SeedConfig,
};
use crate::geometry::{distance_to_segment, Vec2};
use crate::model;
use crate::scalar::Real;
use crate::scenario::{Scenario, ScaledScenario, ScenarioError};
use crate::solver::{self, SolverConfig, SolverStatus};
use crate::surrogate::{
    assemble, exact_penalized_objective, max_binary_gap, penalty_residual, slack_power, surrogate_objective,
    regularize, true_sinr_violation, AssemblyError, SurrogateConfig, TrajectoryIterate,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LambdaSchedule<T> {
    /// The scenario's `λ` throughout.
    Fixed,
    /// `λ_t = min(λ · start_factor · growth^(t−1), λ)`.
    Geometric { start_factor: T, growth: T },
}

#[derive(Debug, Clone)]
pub struct ScaConfig<T> {
    pub epsilon: T,
    pub max_iterations: usize,
    pub lambda_schedule: LambdaSchedule<T>,
    pub rounding_threshold: T,
    pub binary_tolerance: T,
    pub solver: SolverConfig<T>,
    /// Minimum speed, m/s.
    pub theta_min: T,
    /// Interference level assumed by the coverage-disk pre-check.
    pub interference_bound: T,
    /// Trust-region radius in metres, `None` to disable.
    pub trust_region_m: Option<T>,
    /// Step halvings tried before an iteration is declared stalled.
    pub max_damping_halvings: usize,
    /// Starting iterate (scaled units) used instead of the seed when it is
    /// a valid expansion point.
    pub warm_start: Option<TrajectoryIterate<T>>,
}

impl<T: Real> Default for ScaConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(1e-4),
            max_iterations: 50,
            lambda_schedule: LambdaSchedule::Fixed,
            rounding_threshold: T::lit(0.5),
            binary_tolerance: T::lit(1e-3),
            solver: SolverConfig::default(),
            theta_min: T::lit(0.1),
            interference_bound: T::zero(),
            trust_region_m: None,
            max_damping_halvings: 30,
            warm_start: None,
        }
    }
}

impl<T: Real> ScaConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > T::zero()) {
            return Err("epsilon must be positive".into());
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be at least 1".into());
        }
        if !(self.theta_min > T::zero()) {
            return Err("theta_min must be positive".into());
        }
        if let LambdaSchedule::Geometric { start_factor, growth } = self.lambda_schedule {
            if !(start_factor > T::zero() && growth >= T::one()) {
                return Err("geometric schedule needs start_factor > 0 and growth ≥ 1".into());
            }
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iteration: usize,
    pub surrogate_objective: f64,
    pub exact_penalized_objective: f64,
    pub power_only: f64,
    pub penalty_residual: f64,
    pub max_binary_gap: f64,
    pub solver_status: &'static str,
    pub newton_iterations: usize,
    /// Fraction of the subproblem step that was kept.
    pub step_fraction: f64,
    pub lambda: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub n: usize,
    pub t_s: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    /// `None` at the last instant, which has no outgoing slot.
    pub acceleration: Option<[f64; 2]>,
    /// One-based station id; `None` at `n = 0`.
    pub serving_gbs: Option<usize>,
    pub sinr: Option<f64>,
    pub power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceTotals {
    pub power_w_sum: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceValidation {
    pub min_serving_sinr: f64,
    pub endpoint_error_m: f64,
    pub connectivity_violated: bool,
    pub speed_margin: f64,
    pub accel_margin: f64,
    pub kinematics_residual_m: f64,
    /// Slots whose largest `α` fell below the rounding threshold.
    pub ambiguous_slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryTrace {
    pub scenario_fingerprint: String,
    pub slots: Vec<SlotRecord>,
    pub totals: TraceTotals,
    pub validation: TraceValidation,
    pub iterations: usize,
}

impl TrajectoryTrace {
    /// Largest distance of a sampled position from the start→goal segment.
    pub fn max_chord_deviation(&self) -> f64 {
        let (Some(a), Some(b)) = (self.slots.first(), self.slots.last()) else {
            return 0.0;
        };
        let (a, b) = (Vec2::from_array(a.position), Vec2::from_array(b.position));
        self.slots
            .iter()
            .map(|s| distance_to_segment(Vec2::from_array(s.position), a, b))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum ScaError<T: Real> {
    #[error("invalid scenario: {0}")]
    Invalid(#[from] ScenarioError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario is infeasible: {}", .0.note)]
    Infeasible(Box<FeasibilityCertificate<T>>),
    #[error("{0}")]
    Initialization(FeasibilityError),
    #[error("subproblem assembly failed at iteration {iteration}: {error}")]
    Assembly {
        iteration: usize,
        error: AssemblyError,
        reports: Vec<SolveReport>,
    },
    #[error("solver failed at iteration {iteration}: {diagnostics}")]
    Solver {
        iteration: usize,
        diagnostics: String,
        reports: Vec<SolveReport>,
    },
}

impl<T: Real> ScaError<T> {
    /// Reports gathered before the failure.
    pub fn reports(&self) -> &[SolveReport] {
        match self {
            ScaError::Assembly { reports, .. } | ScaError::Solver { reports, .. } => reports,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaOutcome<T> {
    pub trace: TrajectoryTrace,
    pub reports: Vec<SolveReport>,
    pub converged: bool,
    /// Final iterate, scaled units.
    pub iterate: TrajectoryIterate<T>,
    /// Objective of the starting iterate.
    pub initial_objective: T,
    pub seed: FeasibilityCertificate<T>,
    pub warm_started: bool,
}

/// Everything needed to begin iterating: a validated scenario, its scaled
/// form and a feasible starting point.
fn prepare<T: Real>(
    scenario: &Scenario<T>,
    cfg: &ScaConfig<T>,
) -> Result<(ScaledScenario<T>, SurrogateConfig<T>, TrajectoryIterate<T>, FeasibilityCertificate<T>, bool), ScaError<T>> {
    scenario.validate()?;
    cfg.validate().map_err(ScaError::Config)?;
    let sc = scenario.nondimensionalize();
    let mut scfg = SurrogateConfig::for_scenario(&sc);
    scfg.theta_min = cfg.theta_min / sc.length_scale;
    scfg.trust_region = cfg.trust_region_m.map(|r| r / sc.length_scale);

    let disks = circle_graph_check(scenario, cfg.interference_bound);
    if !disks.feasible {
        return Err(ScaError::Infeasible(Box::new(disks)));
    }
    if let Some(ws) = &cfg.warm_start {
        if assemble(ws, &sc, &scfg).is_ok() && true_sinr_violation(ws, &sc) <= T::zero() {
            let seed = certified_seed(scenario, &SeedConfig::default()).map_err(ScaError::Initialization)?;
            return Ok((sc, scfg, ws.clone(), seed, true));
        }
        debug!("warm start rejected; falling back to the seed");
    }
    let init = InitConfig {
        theta_min: cfg.theta_min,
        ..InitConfig::default()
    };
    match seed_iterate(scenario, &SeedConfig::default(), &init).map_err(ScaError::Initialization)? {
        (seed, Some(it)) => Ok((sc, scfg, it, seed, false)),
        (seed, None) => Err(ScaError::Infeasible(Box::new(seed))),
    }
}

fn lambda_at<T: Real>(cfg: &ScaConfig<T>, base: T, iteration: usize) -> T {
    match cfg.lambda_schedule {
        LambdaSchedule::Fixed => base,
        LambdaSchedule::Geometric { start_factor, growth } => {
            (base * start_factor * growth.powi(iteration as i32 - 1)).min(base)
        }
    }
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64_lossy()
}

/// Runs the SCA loop on `scenario`.
pub fn run<T: Real>(scenario: &Scenario<T>, cfg: &ScaConfig<T>) -> Result<ScaOutcome<T>, ScaError<T>> {
    let (base_sc, scfg, mut exp, seed, warm_started) = prepare(scenario, cfg)?;
    let initial_objective = exact_penalized_objective(&exp, &base_sc).map_err(|e| ScaError::Solver {
        iteration: 0,
        diagnostics: e,
        reports: vec![],
    })?;
    info!(
        "start: objective {:.6e}, {}",
        f64_of(initial_objective),
        if warm_started { "warm start" } else { "seed" }
    );
    let mut reports: Vec<SolveReport> = Vec::new();
    let mut prev_obj = initial_objective;
    let mut converged = false;

    for iteration in 1..=cfg.max_iterations {
        let started = Instant::now();
        let mut sc = base_sc.clone();
        sc.penalty_lambda = lambda_at(cfg, base_sc.penalty_lambda, iteration);
        let sub = assemble(&exp, &sc, &scfg).map_err(|error| ScaError::Assembly {
            iteration,
            error,
            reports: reports.clone(),
        })?;
        let x0 = exp.to_flat();
        let res = solver::solve(&sub.problem, &x0, &cfg.solver);
        if res.status == SolverStatus::NumericalFailure {
            return Err(ScaError::Solver {
                iteration,
                diagnostics: res.diagnostics,
                reports,
            });
        }
        if res.status != SolverStatus::Optimal {
            warn!(
                "iteration {iteration}: solver stopped with {} (worst KKT block {})",
                res.status.as_str(),
                res.kkt_residuals.worst_block()
            );
        }
        let raw = TrajectoryIterate::from_flat(sub.layout, &res.x_star);

        // Keep the largest step fraction whose regularized point satisfies
        // the true connectivity constraint.
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=cfg.max_damping_halvings {
            let cand = regularize(exp.blend(&raw, step), &sc, scfg.theta_min);
            let feasible = true_sinr_violation(&cand, &sc) <= T::zero() && assemble(&cand, &sc, &scfg).is_ok();
            if feasible {
                accepted = Some(cand);
                break;
            }
            step *= T::lit(0.5);
        }
        let Some(next) = accepted else {
            warn!("iteration {iteration}: no step fraction keeps the iterate connected; stopping");
            break;
        };
        let surr = surrogate_objective(&sub, &next.to_flat()).unwrap_or(res.objective);
        let exact = exact_penalized_objective(&next, &base_sc).map_err(|e| ScaError::Solver {
            iteration,
            diagnostics: e,
            reports: reports.clone(),
        })?;
        let report = SolveReport {
            iteration,
            surrogate_objective: f64_of(surr),
            exact_penalized_objective: f64_of(exact),
            power_only: f64_of(slack_power(&next, &sc).unwrap_or(T::nan())),
            penalty_residual: f64_of(penalty_residual(&next)),
            max_binary_gap: f64_of(max_binary_gap(&next)),
            solver_status: res.status.as_str(),
            newton_iterations: res.newton_iterations_total,
            step_fraction: f64_of(step),
            lambda: f64_of(sc.penalty_lambda),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        debug!("{report:?}");
        reports.push(report);
        exp = next;
        let change = (surr - prev_obj).abs() / prev_obj.abs().max(T::one());
        prev_obj = surr;
        let lambda_settled = sc.penalty_lambda >= base_sc.penalty_lambda;
        if change < cfg.epsilon && lambda_settled {
            converged = true;
            break;
        }
    }
    let trace = round_and_validate(&exp, scenario, cfg.rounding_threshold, reports.len());
    Ok(ScaOutcome {
        trace,
        reports,
        converged,
        iterate: exp,
        initial_objective,
        seed,
        warm_started,
    })
}

/// Rounds `α` to the argmax station per slot and re-checks the rounded
/// trajectory against the original model, in physical units.
pub fn round_and_validate<T: Real>(
    it: &TrajectoryIterate<T>,
    scenario: &Scenario<T>,
    rounding_threshold: T,
    iterations: usize,
) -> TrajectoryTrace {
    let l = scenario.length_scale;
    let n_slots = it.n_slots();
    let tc = scenario.timing.slot_t_c;
    let emitters = scenario.emitters();
    let h = scenario.vehicle.altitude_h;
    let params = scenario.vehicle.power_params();
    let pos: Vec<Vec2<T>> = it.q.iter().map(|&q| q * l).collect();
    let vel: Vec<Vec2<T>> = it.v.iter().map(|&v| v * l).collect();
    let acc: Vec<Vec2<T>> = it.a.iter().map(|&a| a * l).collect();

    let mut ambiguous = Vec::new();
    let serving: Vec<usize> = it
        .alpha
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let (best, val) = row
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bj, bv), (j, &a)| if a > bv { (j, a) } else { (bj, bv) });
            if val < rounding_threshold {
                ambiguous.push(k + 1);
            }
            best
        })
        .collect();

    let mut slots = Vec::with_capacity(n_slots + 1);
    let mut power_sum = 0.0;
    let mut min_sinr = f64::INFINITY;
    for n in 0..=n_slots {
        let (gbs, sinr) = if n >= 1 {
            let j = serving[n - 1];
            let s = f64_of(model::sinr(pos[n], j, &emitters, h).sinr);
            min_sinr = min_sinr.min(s);
            (Some(scenario.stations[j].id), Some(s))
        } else {
            (None, None)
        };
        let (a, p) = if n < n_slots {
            let p = f64_of(model::propulsion_power(vel[n], acc[n], &params).unwrap_or(T::infinity()));
            power_sum += p;
            (Some([f64_of(acc[n].x), f64_of(acc[n].y)]), Some(p))
        } else {
            (None, None)
        };
        slots.push(SlotRecord {
            n,
            t_s: f64_of(T::lit(n as f64) * tc),
            position: [f64_of(pos[n].x), f64_of(pos[n].y)],
            velocity: [f64_of(vel[n].x), f64_of(vel[n].y)],
            acceleration: a,
            serving_gbs: gbs,
            sinr,
            power_w: p,
        });
    }
    if n_slots == 0 || emitters.is_empty() {
        min_sinr = f64::NAN;
    }
    let gamma = f64_of(scenario.gamma_min);
    let max_speed = vel.iter().map(|v| f64_of(v.norm())).fold(0.0, f64::max);
    let max_acc = acc.iter().map(|a| f64_of(a.norm())).fold(0.0, f64::max);
    let half_tc2 = T::lit(0.5) * tc * tc;
    let mut kin: f64 = 0.0;
    for n in 1..=n_slots {
        let rq = pos[n] - pos[n - 1] - vel[n - 1] * tc - acc[n - 1] * half_tc2;
        let rv = vel[n] - vel[n - 1] - acc[n - 1] * tc;
        kin = kin.max(f64_of(rq.norm())).max(f64_of(rv.norm() * tc));
    }
    let start_err = f64_of((pos[0] - scenario.q_start).norm());
    TrajectoryTrace {
        scenario_fingerprint: scenario.cast::<f64>().fingerprint(),
        slots,
        totals: TraceTotals {
            power_w_sum: power_sum,
            energy_j: power_sum * f64_of(tc),
        },
        validation: TraceValidation {
            min_serving_sinr: min_sinr,
            endpoint_error_m: f64_of((pos[n_slots] - scenario.q_final).norm()),
            connectivity_violated: gamma > 0.0 && !(min_sinr >= gamma * (1.0 - 1e-3)),
            speed_margin: f64_of(scenario.vehicle.v_max) - max_speed,
            accel_margin: f64_of(scenario.vehicle.a_max) - max_acc,
            kinematics_residual_m: kin.max(start_err),
            ambiguous_slots: ambiguous,
        },
        iterations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub total_power_w: Option<f64>,
    pub energy_j: Option<f64>,
    pub converged: bool,
    pub feasible: bool,
    pub iterations: usize,
    pub max_chord_deviation_m: Option<f64>,
    pub connectivity_violated: Option<bool>,
    pub error: Option<String>,
}

/// Runs `run` for each threshold in ascending order, warm-starting each
/// point from the previous feasible solution when that solution is still a
/// valid expansion point.
pub fn gamma_sweep<T: Real>(scenario: &Scenario<T>, gammas: &[T], cfg: &ScaConfig<T>) -> Result<Vec<SweepRow>, String> {
    if gammas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err("thresholds must be sorted in ascending order".into());
    }
    let mut rows = Vec::with_capacity(gammas.len());
    let mut warm: Option<TrajectoryIterate<T>> = None;
    for &g in gammas {
        let mut sc = scenario.clone();
        sc.gamma_min = g;
        let mut c = cfg.clone();
        c.warm_start = warm.clone();
        let row = match run(&sc, &c) {
            Ok(out) => {
                warm = Some(out.iterate.clone());
                SweepRow {
                    gamma: f64_of(g),
                    total_power_w: Some(out.trace.totals.power_w_sum),
                    energy_j: Some(out.trace.totals.energy_j),
                    converged: out.converged,
                    feasible: true,
                    iterations: out.reports.len(),
                    max_chord_deviation_m: Some(out.trace.max_chord_deviation()),
                    connectivity_violated: Some(out.trace.validation.connectivity_violated),
                    error: None,
                }
            }
            Err(e) => SweepRow {
                gamma: f64_of(g),
                total_power_w: None,
                energy_j: None,
                converged: false,
                feasible: !matches!(e, ScaError::Infeasible(_)),
                iterations: e.reports().len(),
                max_chord_deviation_m: None,
                connectivity_violated: None,
                error: Some(e.to_string()),
            },
        };
        info!("sweep point γ = {}: {:?}", row.gamma, row.total_power_w);
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::map1;

    fn straight_iterate(s: &Scenario<f64>, alpha_row: Vec<f64>) -> TrajectoryIterate<f64> {
        let sc = s.nondimensionalize();
        let n = s.n_slots();
        let mut it = TrajectoryIterate {
            q: vec![],
            v: vec![],
            a: vec![Vec2::zero(); n],
            alpha: vec![alpha_row; n],
            theta: vec![],
            rho: vec![vec![0.0; s.n_stations()]; n],
        };
        surrogate_rebuild(&mut it, &sc);
        it.theta = it.v[..n].iter().map(|v| v.norm().max(1e-3)).collect();
        it.with_true_rho(&sc)
    }

    fn surrogate_rebuild(it: &mut TrajectoryIterate<f64>, sc: &ScaledScenario<f64>) {
        crate::surrogate::rebuild_kinematics(it, sc.q_start, sc.v0, sc.q_final, sc.slot);
    }

    #[test]
    fn one_hot_rounding_is_identity() {
        let s = map1();
        let it = straight_iterate(&s, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let tr = round_and_validate(&it, &s, 0.5, 0);
        assert!(tr.slots[1..].iter().all(|r| r.serving_gbs == Some(3)));
        assert!(tr.validation.ambiguous_slots.is_empty());
        assert_eq!(tr.slots.len(), 11);
        assert_eq!(tr.slots[0].serving_gbs, None);
        assert_eq!(tr.slots[10].acceleration, None);
    }

    #[test]
    fn fractional_rounding_takes_the_argmax() {
        let s = map1();
        let it = straight_iterate(&s, vec![0.6, 0.4, 0.0, 0.0, 0.0]);
        let tr = round_and_validate(&it, &s, 0.5, 0);
        assert!(tr.slots[1..].iter().all(|r| r.serving_gbs == Some(1)));
        assert!(tr.validation.ambiguous_slots.is_empty());
        let it = straight_iterate(&s, vec![0.3, 0.3, 0.4, 0.0, 0.0]);
        let tr = round_and_validate(&it, &s, 0.5, 0);
        assert!(tr.slots[1..].iter().all(|r| r.serving_gbs == Some(3)));
        assert_eq!(tr.validation.ambiguous_slots, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn validation_recomputes_sinr_from_the_model() {
        let s = map1();
        let it = straight_iterate(&s, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let tr = round_and_validate(&it, &s, 0.5, 0);
        let e = s.emitters();
        let mut min = f64::INFINITY;
        for r in &tr.slots[1..] {
            let q = Vec2::from_array(r.position);
            // Same definition, written out directly.
            let d2 = |p: Vec2<f64>| (q - p).norm_sq() + 50.0 * 50.0;
            let signal = e[1].gain / d2(e[1].position);
            let interf: f64 = e.iter().enumerate().filter(|(k, _)| *k != 1).map(|(_, x)| x.gain / d2(x.position)).sum();
            let expect = signal / (interf + 1.0);
            assert!((r.sinr.unwrap() - expect).abs() <= 1e-12 * expect);
            min = min.min(expect);
        }
        assert!((tr.validation.min_serving_sinr - min).abs() <= 1e-12 * min);
        // The straight line leaves station 2's island.
        assert!(tr.validation.connectivity_violated);
        assert!(tr.validation.kinematics_residual_m < 1e-9);
        assert_eq!(tr.validation.endpoint_error_m, 0.0);
    }

    #[test]
    fn zero_threshold_run_descends_from_the_seed() {
        let mut s = map1();
        s.gamma_min = 0.0;
        let out = run(&s, &ScaConfig::default()).unwrap();
        assert!(out.converged);
        let last = out.reports.last().unwrap();
        assert!(last.exact_penalized_objective <= out.initial_objective);
        let mut prev = out.initial_objective;
        for r in &out.reports {
            assert!(r.exact_penalized_objective <= prev + 1e-6);
            assert!(r.surrogate_objective >= r.exact_penalized_objective - 1e-9);
            assert!(r.penalty_residual >= 0.0 && r.power_only >= 0.0);
            prev = r.exact_penalized_objective;
        }
        assert!(!out.trace.validation.connectivity_violated);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut s = map1();
        s.gamma_min = 0.0;
        let strip = |o: ScaOutcome<f64>| {
            let mut r = o.reports;
            r.iter_mut().for_each(|x| x.wall_time_s = 0.0);
            (r, o.trace)
        };
        let a = strip(run(&s, &ScaConfig::default()).unwrap());
        let b = strip(run(&s, &ScaConfig::default()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn unreachable_threshold_reports_infeasibility() {
        let mut s = map1();
        s.gamma_min = 1e6;
        match run(&s, &ScaConfig::default()) {
            Err(ScaError::Infeasible(cert)) => assert!(!cert.feasible),
            other => panic!("expected infeasibility, got {:?}", other.map(|o| o.converged)),
        }
    }

    #[test]
    fn sweep_rejects_unsorted_thresholds_and_records_failures() {
        let s = map1();
        assert!(gamma_sweep(&s, &[1.0, 0.5], &ScaConfig::default()).is_err());
        let rows = gamma_sweep(&s, &[0.0, 1e6], &ScaConfig::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].feasible && rows[0].total_power_w.is_some());
        assert!(!rows[1].feasible && rows[1].error.is_some());
    }

    #[test]
    fn config_validation() {
        let ok = ScaConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        assert!(ScaConfig { epsilon: 0.0, ..ok.clone() }.validate().is_err());
        assert!(ScaConfig { max_iterations: 0, ..ok.clone() }.validate().is_err());
        let bad = LambdaSchedule::Geometric { start_factor: 0.01, growth: 0.5 };
        assert!(ScaConfig { lambda_schedule: bad, ..ok.clone() }.validate().is_err());
        let sched = LambdaSchedule::Geometric { start_factor: 0.01, growth: 10.0 };
        let c = ScaConfig { lambda_schedule: sched, ..ok };
        assert_eq!(lambda_at(&c, 1e5, 1), 1e3);
        assert_eq!(lambda_at(&c, 1e5, 3), 1e5);
        assert_eq!(lambda_at(&c, 1e5, 9), 1e5);
    }
}
