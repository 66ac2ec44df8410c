//! Randomized numerical self-checks: finite-difference audits of every
//! analytic derivative, eigenvalue probes of the `f_j` Hessian, and
//! soundness checks of the convex surrogates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::Vec2;
use crate::linalg::{symmetric_eigenvalues, SymMatrix};
use crate::model::{self, f_j, f_j_gradient_hessian, power_gradient_hessian, PowerParams};
use crate::feasibility::{seed_iterate, InitConfig, SeedConfig};
use crate::scenario::map1;
use crate::solver::{check_term, derivative_check, FnTerm, LocalEval};
use crate::surrogate::{
    assemble, bilinear_lower_bound, sinr_surrogate_constraint, theta_speed_constraint, SurrogateConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeFamily {
    Derivatives,
    Concavity,
    Surrogate,
}

impl ProbeFamily {
    pub const ALL: [ProbeFamily; 3] = [ProbeFamily::Derivatives, ProbeFamily::Concavity, ProbeFamily::Surrogate];

    pub fn name(self) -> &'static str {
        match self {
            ProbeFamily::Derivatives => "derivatives",
            ProbeFamily::Concavity => "concavity",
            ProbeFamily::Surrogate => "surrogate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub family: ProbeFamily,
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    /// Worst observed value of the probe's error measure.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub seed: u64,
    /// Adds a callback with a deliberately wrong gradient to the derivative
    /// probes, to exercise the failure path.
    pub inject_sign_error: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            inject_sign_error: false,
        }
    }
}

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-5;

/// Runs the selected families in the order given.
pub fn run_probes(families: &[ProbeFamily], opts: &ProbeOptions) -> Vec<ProbeResult> {
    let mut out = Vec::new();
    for &f in families {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((f as u64 + 1) * 0x9e37_79b9));
        match f {
            ProbeFamily::Derivatives => out.extend(derivative_probes(&mut rng, opts)),
            ProbeFamily::Concavity => out.push(concavity_probe(&mut rng, 1000)),
            ProbeFamily::Surrogate => out.extend(surrogate_probes(&mut rng, 100)),
        }
    }
    out
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn result(family: ProbeFamily, name: &str, samples: usize, worst: f64, tolerance: f64, detail: String) -> ProbeResult {
    ProbeResult {
        family,
        name: name.to_string(),
        passed: worst <= tolerance,
        samples,
        worst,
        tolerance,
        detail,
    }
}

/// Worst finite-difference error of `term` over `points`.
fn fd_worst(term: &FnTerm<f64>, points: &[Vec<f64>]) -> (f64, String) {
    let mut worst = 0.0f64;
    let mut note = String::new();
    for p in points {
        match check_term(term, p, FD_STEP) {
            Ok((g, h)) => worst = worst.max(g).max(h),
            Err(e) => {
                worst = f64::INFINITY;
                note = format!("evaluation failed: {e}");
            }
        }
    }
    (worst, note)
}

fn derivative_probes(rng: &mut ChaCha8Rng, opts: &ProbeOptions) -> Vec<ProbeResult> {
    let fam = ProbeFamily::Derivatives;
    let n = 100;
    let sc = map1().nondimensionalize();
    let mut out = Vec::new();

    let params: PowerParams<f64> = sc.power;
    let power = FnTerm::new(vec![0, 1, 2, 3, 4], "power", move |x: &[f64]| {
        let d = power_gradient_hessian(Vec2::new(x[0], x[1]), Vec2::new(x[2], x[3]), x[4], &params, 1e-8)
            .map_err(|e| e.to_string())?;
        Ok(LocalEval {
            value: d.value,
            grad: d.grad.to_vec(),
            hess: d.hess.iter().flatten().copied().collect(),
        })
    });
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let speed = rng.gen_range(0.02..0.2);
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            vec![
                speed * ang.cos(),
                speed * ang.sin(),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(0.02..0.2),
            ]
        })
        .collect();
    let (w, note) = fd_worst(&power, &pts);
    out.push(result(fam, "power", n, w, FD_TOL, note));

    let mut worst = 0.0f64;
    for _ in 0..n {
        let js = rng.gen_range(2..=8);
        let gains: Vec<f64> = (0..js).map(|_| log_uniform(rng, 1e1, 1e5)).collect();
        let j = rng.gen_range(0..js);
        let rho: Vec<f64> = (0..js).map(|_| log_uniform(rng, 0.25, 100.0)).collect();
        let g = gains.clone();
        let term = FnTerm::new((0..js).collect(), "f_j", move |x: &[f64]| {
            let d = f_j_gradient_hessian(x, j, &g).map_err(|e| e.to_string())?;
            let m = x.len();
            let mut e = LocalEval::zeros(m);
            e.value = d.value;
            let k = d.indices.len();
            for (a, &ia) in d.indices.iter().enumerate() {
                e.grad[ia] = d.grad[a];
                for (b, &ib) in d.indices.iter().enumerate() {
                    e.hess[ia * m + ib] = d.hess[a * k + b];
                }
            }
            Ok(e)
        });
        worst = worst.max(fd_worst(&term, &[rho]).0);
    }
    out.push(result(fam, "f_j", n, worst, FD_TOL, String::new()));

    let mut worst = 0.0f64;
    for _ in 0..n {
        let js = rng.gen_range(2..=8);
        let gains: Vec<f64> = (0..js).map(|_| log_uniform(rng, 1e1, 1e5)).collect();
        let j = rng.gen_range(0..js);
        let gamma = rng.gen_range(0.5..4.0);
        let (alpha0, rho0) = (rng.gen_range(0.0..1.0), log_uniform(rng, 0.25, 100.0));
        let mut x = vec![rng.gen_range(0.05..0.95)];
        x.extend((0..js).map(|_| log_uniform(rng, 0.25, 100.0)));
        let g = gains.clone();
        let term = FnTerm::new((0..=js).collect(), "sinr surrogate", move |x: &[f64]| {
            sinr_surrogate_constraint(x[0], &x[1..], j, &g, gamma, alpha0, rho0)
        });
        worst = worst.max(fd_worst(&term, &[x]).0);
    }
    out.push(result(fam, "sinr-surrogate", n, worst, FD_TOL, String::new()));

    let mut worst = 0.0f64;
    for _ in 0..n {
        let v0: Vec2<f64> = Vec2::new(rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
        let term = FnTerm::new(vec![0, 1, 2], "theta-speed", move |x: &[f64]| {
            Ok(theta_speed_constraint(Vec2::new(x[0], x[1]), x[2], v0))
        });
        let x = vec![rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15), rng.gen_range(0.01..0.2)];
        worst = worst.max(fd_worst(&term, &[x]).0);
    }
    out.push(result(fam, "theta-speed", n, worst, FD_TOL, String::new()));

    out.push(subproblem_probe(rng, n, opts.inject_sign_error));
    out
}

/// Every term of a subproblem assembled on the first bundled map, checked
/// at random interior points around the expansion point.
fn subproblem_probe(rng: &mut ChaCha8Rng, n: usize, inject: bool) -> ProbeResult {
    let fam = ProbeFamily::Derivatives;
    let mut s = map1();
    s.gamma_min = 0.0;
    let mut it = match seed_iterate(&s, &SeedConfig::default(), &InitConfig::default()) {
        Ok((_, Some(it))) => it,
        Ok((_, None)) => return result(fam, "subproblem-terms", 0, f64::INFINITY, FD_TOL, "no seed".into()),
        Err(e) => return result(fam, "subproblem-terms", 0, f64::INFINITY, FD_TOL, e.to_string()),
    };
    // One-hot on the strongest station, with a threshold the path meets
    // everywhere.
    let n_slots = s.n_slots();
    let emitters = s.emitters();
    let mut weakest = f64::INFINITY;
    it.alpha = (1..=n_slots)
        .map(|k| {
            let b = model::best_station(it.q[k] * s.length_scale, &emitters, s.vehicle.altitude_h).unwrap();
            weakest = weakest.min(b.sinr);
            (0..emitters.len()).map(|j| if j == b.serving { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    s.gamma_min = 0.5 * weakest;
    let sc = s.nondimensionalize();
    let it = it.with_true_rho(&sc);
    let mut sub = match assemble(&it, &sc, &SurrogateConfig::for_scenario(&sc)) {
        Ok(sub) => sub,
        Err(e) => return result(fam, "subproblem-terms", 0, f64::INFINITY, FD_TOL, e.to_string()),
    };
    if inject {
        sub.problem.add_objective(FnTerm::new(vec![0, 1], "injected sign error", |x: &[f64]| {
            Ok(LocalEval {
                value: x[0] * x[0] + x[1],
                grad: vec![-2.0 * x[0], 1.0],
                hess: vec![2.0, 0.0, 0.0, 0.0],
            })
        }));
    }
    let l = sub.layout;
    let base = it.to_flat();
    let mut worst = 0.0f64;
    let mut worst_term = String::new();
    for _ in 0..n {
        let mut x = base.clone();
        for k in 0..=n_slots {
            for c in 0..2 {
                x[l.q(k, c)] += rng.gen_range(-0.05..0.05);
                x[l.v(k, c)] += rng.gen_range(-0.02..0.02);
            }
        }
        for k in 0..n_slots {
            x[l.theta(k)] = (x[l.theta(k)] * rng.gen_range(0.8..1.2)).max(0.01);
        }
        for k in 1..=n_slots {
            for j in 0..l.n_stations {
                x[l.alpha(k, j)] = rng.gen_range(0.05..0.95);
                x[l.rho(k, j)] *= rng.gen_range(0.9..1.1);
            }
        }
        let r = derivative_check(&sub.problem, &x, FD_STEP);
        if !r.domain_failures.is_empty() {
            return result(
                fam,
                "subproblem-terms",
                n,
                f64::INFINITY,
                FD_TOL,
                format!("domain failure in {}", r.domain_failures[0]),
            );
        }
        if r.max_rel_error() > worst {
            worst = r.max_rel_error();
            worst_term = r.worst_term;
        }
    }
    result(fam, "subproblem-terms", n, worst, FD_TOL, format!("worst term: {worst_term}"))
}

/// Largest eigenvalue of the `f_j` Hessian relative to its spectral norm.
fn concavity_probe(rng: &mut ChaCha8Rng, draws: usize) -> ProbeResult {
    let mut worst = f64::NEG_INFINITY;
    let mut detail = String::new();
    for d in 0..draws {
        let js = 2 + d % 7;
        let gains: Vec<f64> = (0..js).map(|_| log_uniform(rng, 1e-2, 1e6)).collect();
        let rho: Vec<f64> = (0..js).map(|_| log_uniform(rng, 1e-1, 1e3)).collect();
        let j = rng.gen_range(0..js);
        let fd = match f_j_gradient_hessian(&rho, j, &gains) {
            Ok(fd) => fd,
            Err(e) => {
                return result(ProbeFamily::Concavity, "f_j-hessian", d, f64::INFINITY, 1e-8, e.to_string());
            }
        };
        let k = fd.indices.len();
        let h = SymMatrix::from_fn(k, |a, b| fd.hess[a * k + b]);
        let eig = symmetric_eigenvalues(&h);
        let norm = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let top = eig.last().copied().unwrap_or(0.0);
        let ratio = if norm > 0.0 { top / norm } else { 0.0 };
        if ratio > worst {
            worst = ratio;
            detail = format!("J = {js}, largest eigenvalue {top:e}, norm {norm:e}");
        }
    }
    result(ProbeFamily::Concavity, "f_j-hessian", draws, worst, 1e-8, detail)
}

fn surrogate_probes(rng: &mut ChaCha8Rng, draws: usize) -> Vec<ProbeResult> {
    let fam = ProbeFamily::Surrogate;
    let mut tangency = 0.0f64;
    let mut theta_gap = f64::NEG_INFINITY;
    let mut sinr_gap = f64::NEG_INFINITY;
    let mut minorant = 0.0f64;
    for _ in 0..draws {
        let js = rng.gen_range(2..=8);
        let gains: Vec<f64> = (0..js).map(|_| log_uniform(rng, 1e1, 1e5)).collect();
        let j = rng.gen_range(0..js);
        let gamma = rng.gen_range(0.5..4.0);
        let rho0: Vec<f64> = (0..js).map(|_| log_uniform(rng, 0.25, 100.0)).collect();
        let alpha0 = rng.gen_range(0.0..1.0);
        let exact = |a: f64, r: &[f64]| gamma / gains[j] * a * r[j] - f_j(r, j, &gains).unwrap();

        // Tangency of the SINR surrogate, the θ minorant and g.
        let s0 = sinr_surrogate_constraint(alpha0, &rho0, j, &gains, gamma, alpha0, rho0[j]).unwrap().value;
        let e0 = exact(alpha0, &rho0);
        tangency = tangency.max((s0 - e0).abs() / e0.abs().max(1.0));
        let v0: Vec2<f64> = Vec2::new(rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
        let th: f64 = rng.gen_range(0.01..0.2);
        let t0 = theta_speed_constraint(v0, th, v0).value;
        tangency = tangency.max((t0 - (th * th - v0.norm_sq())).abs() / t0.abs().max(1.0));
        let g0 = bilinear_lower_bound(alpha0, rho0[j], alpha0, rho0[j]);
        let sq = alpha0 * alpha0 + rho0[j] * rho0[j];
        tangency = tangency.max((g0 - sq).abs() / sq.max(1.0));

        // θ feasible for the linearized constraint never exceeds the speed.
        let v = Vec2::new(rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
        let lin: f64 = v0.norm_sq() + 2.0 * v0.dot(v - v0);
        if lin > 0.0 {
            let theta = lin.sqrt() * rng.gen_range(0.0..1.0);
            if theta_speed_constraint(v, theta, v0).value <= 0.0 {
                theta_gap = theta_gap.max(theta * theta - v.norm_sq());
            }
        }

        // Surrogate-feasible points satisfy the exact SINR constraint.
        let alpha = rng.gen_range(0.0..1.0);
        let rho: Vec<f64> = rho0.iter().map(|&r| r * rng.gen_range(0.5..1.5)).collect();
        let f = f_j(&rho, j, &gains).unwrap();
        let at_unit = sinr_surrogate_constraint(alpha, &rho, j, &gains, 1.0, alpha0, rho0[j]).unwrap().value + f;
        if at_unit > 0.0 {
            let g_feasible = rng.gen_range(0.0..1.0) * f / at_unit;
            let sv = sinr_surrogate_constraint(alpha, &rho, j, &gains, g_feasible, alpha0, rho0[j]).unwrap().value;
            if sv <= 0.0 {
                sinr_gap = sinr_gap.max(g_feasible / gains[j] * alpha * rho[j] - f);
            }
        }

        // g is a minorant of α² + ρ² whose gap is the squared displacement.
        let g = bilinear_lower_bound(alpha, rho[j], alpha0, rho0[j]);
        let gap = alpha * alpha + rho[j] * rho[j] - g;
        let disp = (alpha - alpha0).powi(2) + (rho[j] - rho0[j]).powi(2);
        minorant = minorant.max((gap - disp).abs() / disp.max(1.0)).max(-gap.min(0.0));
    }
    vec![
        result(fam, "tangency", draws, tangency, 1e-9, String::new()),
        result(fam, "theta-speed-implication", draws, theta_gap.max(0.0), 1e-12, String::new()),
        result(fam, "sinr-implication", draws, sinr_gap.max(0.0), 1e-12, String::new()),
        result(fam, "minorant-gap", draws, minorant, 1e-9, String::new()),
    ]
}
