use log::{debug, trace};

use super::problem::{gather, ConvexProblem, LocalEval};
use crate::linalg::{inf_norm, LdlFactor, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub barrier_mu_factor: T,
    /// The first barrier parameter is its reciprocal.
    pub initial_barrier_weight: T,
    pub kkt_tolerance: T,
    pub max_newton_per_stage: usize,
    pub armijo_sigma: T,
    pub backtrack_beta: T,
    pub fraction_to_boundary: T,
    /// Smallest initial slack for inequalities that are tight or violated
    /// at the starting point.
    pub slack_floor: T,
    pub max_stages: usize,
    pub refinement_steps: usize,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            barrier_mu_factor: T::lit(10.0),
            initial_barrier_weight: T::one(),
            kkt_tolerance: T::lit(1e-8),
            max_newton_per_stage: 50,
            armijo_sigma: T::lit(0.01),
            backtrack_beta: T::lit(0.5),
            fraction_to_boundary: T::lit(0.995),
            slack_floor: T::lit(1e-6),
            max_stages: 40,
            refinement_steps: 3,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("barrier_mu_factor", self.barrier_mu_factor),
            ("initial_barrier_weight", self.initial_barrier_weight),
            ("kkt_tolerance", self.kkt_tolerance),
            ("armijo_sigma", self.armijo_sigma),
            ("slack_floor", self.slack_floor),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.barrier_mu_factor > T::one()) {
            return Err("barrier_mu_factor must exceed 1".into());
        }
        if !(self.backtrack_beta > T::zero() && self.backtrack_beta < T::one()) {
            return Err("backtrack_beta must lie in (0, 1)".into());
        }
        if !(self.fraction_to_boundary > T::zero() && self.fraction_to_boundary < T::one()) {
            return Err("fraction_to_boundary must lie in (0, 1)".into());
        }
        if self.max_newton_per_stage == 0 || self.max_stages == 0 {
            return Err("iteration limits must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::MaxIterations => "max_iterations",
            SolverStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals<T> {
    pub stationarity: T,
    pub primal_eq: T,
    pub primal_ineq: T,
    pub complementarity: T,
}

impl<T: Real> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.complementarity)
    }

    pub fn all_within(&self, tol: T) -> bool {
        self.max() <= tol
    }

    /// Name of the largest block, for diagnostics.
    pub fn worst_block(&self) -> &'static str {
        let pairs = [
            ("stationarity", self.stationarity),
            ("primal_eq", self.primal_eq),
            ("primal_ineq", self.primal_ineq),
            ("complementarity", self.complementarity),
        ];
        let mut worst = pairs[0];
        for p in pairs {
            if p.1 > worst.1 {
                worst = p;
            }
        }
        worst.0
    }
}

/// Equality multipliers `y` and inequality multipliers `z ≥ 0`, with the
/// Lagrangian `f + yᵀ(Ax − b) + zᵀc(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers<T> {
    pub y: Vec<T>,
    pub z: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct SolverResult<T> {
    pub x_star: Vec<T>,
    pub objective: T,
    pub status: SolverStatus,
    pub kkt_residuals: KktResiduals<T>,
    pub multipliers: Multipliers<T>,
    pub newton_iterations_total: usize,
    pub barrier_stages: usize,
    pub final_mu: T,
    pub diagnostics: String,
}

struct PointEval<T> {
    grad_f: Vec<T>,
    obj_hess: Vec<LocalEval<T>>,
    c: Vec<T>,
    c_eval: Vec<LocalEval<T>>,
}

fn evaluate<T: Real>(p: &ConvexProblem<T>, x: &[T]) -> Result<PointEval<T>, String> {
    let mut grad_f = p.linear_cost.clone();
    let mut obj_hess = Vec::with_capacity(p.objective.len());
    for t in &p.objective {
        let e = t.eval(&gather(x, t.support())).map_err(|e| format!("{}: {e}", t.label()))?;
        if !e.value.is_finite() || e.grad.iter().any(|g| !g.is_finite()) {
            return Err(format!("{}: non-finite evaluation", t.label()));
        }
        for (k, &i) in t.support().iter().enumerate() {
            grad_f[i] += e.grad[k];
        }
        obj_hess.push(e);
    }
    let mut c = Vec::with_capacity(p.inequalities.len());
    let mut c_eval = Vec::with_capacity(p.inequalities.len());
    for t in &p.inequalities {
        let e = t.eval(&gather(x, t.support())).map_err(|e| format!("{}: {e}", t.label()))?;
        if !e.value.is_finite() || e.grad.iter().any(|g| !g.is_finite()) {
            return Err(format!("{}: non-finite evaluation", t.label()));
        }
        c.push(e.value);
        c_eval.push(e);
    }
    Ok(PointEval {
        grad_f,
        obj_hess,
        c,
        c_eval,
    })
}

struct Residuals<T> {
    dual: Vec<T>,
    primal_eq: Vec<T>,
    primal_ineq: Vec<T>,
    comp: Vec<T>,
}

impl<T: Real> Residuals<T> {
    fn norm2(&self) -> T {
        let sq = |v: &[T]| v.iter().map(|&a| a * a).sum::<T>();
        (sq(&self.dual) + sq(&self.primal_eq) + sq(&self.primal_ineq) + sq(&self.comp)).sqrt()
    }

    fn inf(&self) -> T {
        inf_norm(&self.dual)
            .max(inf_norm(&self.primal_eq))
            .max(inf_norm(&self.primal_ineq))
            .max(inf_norm(&self.comp))
    }
}

fn dual_residual<T: Real>(p: &ConvexProblem<T>, ev: &PointEval<T>, y: &[T], z: &[T]) -> Vec<T> {
    let mut r = ev.grad_f.clone();
    for (row, &yr) in p.equalities.iter().zip(y) {
        for &(i, a) in &row.coeffs {
            r[i] += a * yr;
        }
    }
    for ((t, e), &zi) in p.inequalities.iter().zip(&ev.c_eval).zip(z) {
        for (k, &i) in t.support().iter().enumerate() {
            r[i] += zi * e.grad[k];
        }
    }
    r
}

fn residuals<T: Real>(
    p: &ConvexProblem<T>,
    ev: &PointEval<T>,
    x: &[T],
    s: &[T],
    y: &[T],
    z: &[T],
    mu: T,
) -> Residuals<T> {
    Residuals {
        dual: dual_residual(p, ev, y, z),
        primal_eq: p.equality_residuals(x),
        primal_ineq: ev.c.iter().zip(s).map(|(&c, &s)| c + s).collect(),
        comp: s.iter().zip(z).map(|(&s, &z)| s * z - mu).collect(),
    }
}

fn kkt_from_eval<T: Real>(p: &ConvexProblem<T>, ev: &PointEval<T>, x: &[T], m: &Multipliers<T>) -> KktResiduals<T> {
    KktResiduals {
        stationarity: inf_norm(&dual_residual(p, ev, &m.y, &m.z)),
        primal_eq: inf_norm(&p.equality_residuals(x)),
        primal_ineq: ev.c.iter().fold(T::zero(), |a, &c| a.max(c.max(T::zero()))),
        complementarity: ev.c.iter().zip(&m.z).fold(T::zero(), |a, (&c, &z)| a.max((z * c).abs())),
    }
}

/// KKT residuals of `problem` at `(x, multipliers)`:
/// stationarity `‖∇f + Aᵀy + Σ zᵢ∇cᵢ‖∞`, `‖Ax − b‖∞`, `max(0, cᵢ)` and
/// `max |zᵢ cᵢ|`.
pub fn kkt_residuals<T: Real>(
    problem: &ConvexProblem<T>,
    x: &[T],
    multipliers: &Multipliers<T>,
) -> Result<KktResiduals<T>, String> {
    assert_eq!(x.len(), problem.n_vars);
    assert_eq!(multipliers.y.len(), problem.equalities.len());
    assert_eq!(multipliers.z.len(), problem.inequalities.len());
    let ev = evaluate(problem, x)?;
    Ok(kkt_from_eval(problem, &ev, x, multipliers))
}

struct Direction<T> {
    dx: Vec<T>,
    ds: Vec<T>,
    dy: Vec<T>,
    dz: Vec<T>,
}

/// Primal-dual interior-point method with inequality slacks.
///
/// The starting point only has to lie in the domain of every term: slacks
/// absorb inequality violation and the Newton step removes equality drift.
pub fn solve<T: Real>(problem: &ConvexProblem<T>, warm_start: &[T], cfg: &SolverConfig<T>) -> SolverResult<T> {
    if let Err(e) = cfg.validate() {
        panic!("invalid solver configuration: {e}");
    }
    assert_eq!(warm_start.len(), problem.n_vars, "warm start has wrong length");
    let me = problem.equalities.len();
    let mi = problem.inequalities.len();

    let mut x = warm_start.to_vec();
    let failure = |x: Vec<T>, msg: String, iters: usize| SolverResult {
        objective: problem.objective_value(&x).unwrap_or(T::nan()),
        x_star: x,
        status: SolverStatus::NumericalFailure,
        kkt_residuals: KktResiduals {
            stationarity: T::infinity(),
            primal_eq: T::infinity(),
            primal_ineq: T::infinity(),
            complementarity: T::infinity(),
        },
        multipliers: Multipliers {
            y: vec![T::zero(); me],
            z: vec![T::zero(); mi],
        },
        newton_iterations_total: iters,
        barrier_stages: 0,
        final_mu: T::nan(),
        diagnostics: msg,
    };

    let mut ev = match evaluate(problem, &x) {
        Ok(ev) => ev,
        Err(e) => return failure(x, format!("starting point outside the domain: {e}"), 0),
    };

    let mut mu = cfg.initial_barrier_weight.recip();
    let mu_floor = cfg.kkt_tolerance / cfg.barrier_mu_factor;
    let mut s: Vec<T> = ev.c.iter().map(|&c| (-c).max(cfg.slack_floor)).collect();
    let mut z: Vec<T> = s.iter().map(|&si| mu / si).collect();
    let mut y = vec![T::zero(); me];

    let mut total_iters = 0usize;
    let mut stages = 0usize;
    let mut last_delta = T::zero();
    let mut stall_streak = 0usize;
    let mut status = SolverStatus::MaxIterations;
    let mut diagnostics = String::new();

    'stages: while stages < cfg.max_stages {
        stages += 1;
        let mut stage_iters = 0usize;
        loop {
            let mults = Multipliers { y: y.clone(), z: z.clone() };
            let kkt = kkt_from_eval(problem, &ev, &x, &mults);
            if kkt.all_within(cfg.kkt_tolerance) {
                status = SolverStatus::Optimal;
                break 'stages;
            }
            let r = residuals(problem, &ev, &x, &s, &y, &z, mu);
            if r.inf() <= T::lit(10.0) * mu && mu > mu_floor {
                break;
            }
            if stage_iters >= cfg.max_newton_per_stage {
                diagnostics = format!(
                    "stage with mu={mu:e} hit the Newton limit; worst block {} = {:e}",
                    kkt.worst_block(),
                    kkt.max()
                );
                status = SolverStatus::MaxIterations;
                break 'stages;
            }
            stage_iters += 1;
            total_iters += 1;

            let dir = match newton_direction(problem, &ev, &s, &z, &r, cfg, &mut last_delta) {
                Ok(d) => d,
                Err(e) => {
                    diagnostics = format!("{e}; worst block {} = {:e}", kkt.worst_block(), kkt.max());
                    status = SolverStatus::NumericalFailure;
                    break 'stages;
                }
            };

            let tau = cfg.fraction_to_boundary;
            let mut alpha = T::one();
            for (v, dv) in s.iter().zip(&dir.ds).chain(z.iter().zip(&dir.dz)) {
                if *dv < T::zero() {
                    alpha = alpha.min(-tau * *v / *dv);
                }
            }

            let phi0 = r.norm2();
            let mut accepted = None;
            for _ in 0..60 {
                let xt: Vec<T> = x.iter().zip(&dir.dx).map(|(&a, &d)| a + alpha * d).collect();
                let st: Vec<T> = s.iter().zip(&dir.ds).map(|(&a, &d)| a + alpha * d).collect();
                let yt: Vec<T> = y.iter().zip(&dir.dy).map(|(&a, &d)| a + alpha * d).collect();
                let zt: Vec<T> = z.iter().zip(&dir.dz).map(|(&a, &d)| a + alpha * d).collect();
                if let Ok(evt) = evaluate(problem, &xt) {
                    let phi = residuals(problem, &evt, &xt, &st, &yt, &zt, mu).norm2();
                    if phi.is_finite() && phi <= (T::one() - cfg.armijo_sigma * alpha) * phi0 {
                        accepted = Some((xt, st, yt, zt, evt));
                        break;
                    }
                }
                alpha *= cfg.backtrack_beta;
            }
            match accepted {
                Some((xt, st, yt, zt, evt)) => {
                    trace!("mu={mu:e} iter={stage_iters} alpha={alpha:e} merit={phi0:e}");
                    x = xt;
                    s = st;
                    y = yt;
                    z = zt;
                    ev = evt;
                    stall_streak = 0;
                }
                None => {
                    // The merit cannot decrease at this barrier level; the
                    // iterate is as good as arithmetic allows, so move on.
                    stall_streak += 1;
                    debug!("line search stalled at mu={mu:e}, merit={phi0:e}");
                    if stall_streak >= 3 || mu <= mu_floor {
                        diagnostics = format!(
                            "line search stalled at mu={mu:e}; worst block {} = {:e}",
                            kkt.worst_block(),
                            kkt.max()
                        );
                        status = SolverStatus::NumericalFailure;
                        break 'stages;
                    }
                    break;
                }
            }
        }
        mu = (mu / cfg.barrier_mu_factor).max(mu_floor);
    }
    if stages >= cfg.max_stages && status == SolverStatus::MaxIterations && diagnostics.is_empty() {
        diagnostics = "barrier stage limit reached".into();
    }

    let multipliers = Multipliers { y, z };
    let kkt = kkt_from_eval(problem, &ev, &x, &multipliers);
    if status == SolverStatus::Optimal {
        debug_assert!(kkt.all_within(cfg.kkt_tolerance));
    }
    SolverResult {
        objective: problem.objective_value(&x).unwrap_or(T::nan()),
        x_star: x,
        status,
        kkt_residuals: kkt,
        multipliers,
        newton_iterations_total: total_iters,
        barrier_stages: stages,
        final_mu: mu,
        diagnostics,
    }
}

fn newton_direction<T: Real>(
    p: &ConvexProblem<T>,
    ev: &PointEval<T>,
    s: &[T],
    z: &[T],
    r: &Residuals<T>,
    cfg: &SolverConfig<T>,
    last_delta: &mut T,
) -> Result<Direction<T>, String> {
    let n = p.n_vars;
    let me = p.equalities.len();
    let mut k = SymMatrix::zeros(n + me);

    for (t, e) in p.objective.iter().zip(&ev.obj_hess) {
        add_local_hessian(&mut k, t.support(), &e.hess, T::one());
    }
    // rhs_x = −r_d − Jᵀ S⁻¹ (Z r_i − r_c)
    let mut rhs = vec![T::zero(); n + me];
    for i in 0..n {
        rhs[i] = -r.dual[i];
    }
    for (idx, (t, e)) in p.inequalities.iter().zip(&ev.c_eval).enumerate() {
        let sup = t.support();
        add_local_hessian(&mut k, sup, &e.hess, z[idx]);
        let w = z[idx] / s[idx];
        for (a, &ia) in sup.iter().enumerate() {
            for (b, &ib) in sup.iter().enumerate().take(a + 1) {
                k.add_sym(ia, ib, w * e.grad[a] * e.grad[b]);
            }
        }
        let coef = (z[idx] * r.primal_ineq[idx] - r.comp[idx]) / s[idx];
        for (a, &ia) in sup.iter().enumerate() {
            rhs[ia] -= e.grad[a] * coef;
        }
    }
    for (row, eq) in p.equalities.iter().enumerate() {
        for &(j, a) in &eq.coeffs {
            k.add_sym(n + row, j, a);
        }
        rhs[n + row] = -r.primal_eq[row];
    }
    if !k.is_finite() {
        return Err("non-finite KKT matrix".into());
    }

    let max_delta = T::lit(1e-2);
    let mut delta = T::zero();
    let sol = loop {
        let mut kk = k.clone();
        if delta > T::zero() {
            kk.add_diag(0..n, delta);
            kk.add_diag(n..n + me, -delta);
        }
        let ok = match LdlFactor::factor(&kk) {
            Ok(f) => {
                let inertia = f.inertia();
                if inertia.positive == n && inertia.negative == me {
                    let (sol, _res) = f.solve_refined(&kk, &rhs, cfg.refinement_steps);
                    if sol.iter().all(|v| v.is_finite()) {
                        Some(sol)
                    } else {
                        None
                    }
                } else {
                    None
                }
            }
            Err(_) => None,
        };
        if let Some(sol) = ok {
            *last_delta = delta;
            break sol;
        }
        delta = if delta == T::zero() {
            if *last_delta > T::zero() {
                (*last_delta / T::lit(4.0)).max(T::lit(1e-10))
            } else {
                T::lit(1e-10)
            }
        } else {
            delta * T::lit(2.0)
        };
        if delta > max_delta {
            return Err("KKT factorization failed even with maximal regularization".into());
        }
    };

    let dx = sol[..n].to_vec();
    let dy = sol[n..].to_vec();
    let mut ds = Vec::with_capacity(s.len());
    let mut dz = Vec::with_capacity(s.len());
    for (idx, (t, e)) in p.inequalities.iter().zip(&ev.c_eval).enumerate() {
        let jdx: T = t.support().iter().enumerate().map(|(a, &ia)| e.grad[a] * dx[ia]).sum();
        ds.push(-r.primal_ineq[idx] - jdx);
        dz.push((-r.comp[idx] + z[idx] * r.primal_ineq[idx] + z[idx] * jdx) / s[idx]);
    }
    Ok(Direction { dx, ds, dy, dz })
}

fn add_local_hessian<T: Real>(k: &mut SymMatrix<T>, support: &[usize], hess: &[T], scale: T) {
    let m = support.len();
    if scale == T::zero() {
        return;
    }
    for a in 0..m {
        for b in 0..=a {
            let v = hess[a * m + b];
            if v != T::zero() {
                k.add_sym(support[a], support[b], scale * v);
            }
        }
    }
}
