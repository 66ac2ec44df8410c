//! Convex subproblem built around an expansion point: linearized penalty,
//! tangent-plane surrogates for the nonconvex slack constraints, and the
//! difference-of-convex SINR constraint.
//!
//! All quantities here are in the scaled units of [`ScaledScenario`].

use thiserror::Error;

use crate::geometry::Vec2;
use crate::model::{self, f_j_gradient_hessian, power_gradient_hessian, PowerParams};
use crate::scalar::Real;
use crate::scenario::ScaledScenario;
use crate::solver::{ConvexProblem, LocalEval, SmoothTerm};

/// Flat index map for `(Q, v, a, α, θ, ρ)`.
///
/// `Q` and `v` live on `n = 0..=N`, `a` and `θ` on `n = 0..N`, `α` and `ρ`
/// on `n = 1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_slots: usize,
    pub n_stations: usize,
}

impl Layout {
    pub fn new(n_slots: usize, n_stations: usize) -> Self {
        assert!(n_slots >= 1, "need at least one slot");
        Self { n_slots, n_stations }
    }

    fn v_base(&self) -> usize {
        2 * (self.n_slots + 1)
    }
    fn a_base(&self) -> usize {
        4 * (self.n_slots + 1)
    }
    fn alpha_base(&self) -> usize {
        self.a_base() + 2 * self.n_slots
    }
    fn theta_base(&self) -> usize {
        self.alpha_base() + self.n_slots * self.n_stations
    }
    fn rho_base(&self) -> usize {
        self.theta_base() + self.n_slots
    }

    pub fn n_vars(&self) -> usize {
        self.rho_base() + self.n_slots * self.n_stations
    }

    pub fn q(&self, n: usize, c: usize) -> usize {
        debug_assert!(n <= self.n_slots && c < 2);
        2 * n + c
    }
    pub fn v(&self, n: usize, c: usize) -> usize {
        debug_assert!(n <= self.n_slots && c < 2);
        self.v_base() + 2 * n + c
    }
    pub fn a(&self, n: usize, c: usize) -> usize {
        debug_assert!(n < self.n_slots && c < 2);
        self.a_base() + 2 * n + c
    }
    /// `n` ranges over `1..=N`.
    pub fn alpha(&self, n: usize, j: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.n_slots && j < self.n_stations);
        self.alpha_base() + (n - 1) * self.n_stations + j
    }
    pub fn theta(&self, n: usize) -> usize {
        debug_assert!(n < self.n_slots);
        self.theta_base() + n
    }
    /// `n` ranges over `1..=N`.
    pub fn rho(&self, n: usize, j: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.n_slots && j < self.n_stations);
        self.rho_base() + (n - 1) * self.n_stations + j
    }
}

/// One SCA iterate in scaled units. `alpha[k]` and `rho[k]` belong to slot
/// `n = k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryIterate<T> {
    pub q: Vec<Vec2<T>>,
    pub v: Vec<Vec2<T>>,
    pub a: Vec<Vec2<T>>,
    pub alpha: Vec<Vec<T>>,
    pub theta: Vec<T>,
    pub rho: Vec<Vec<T>>,
}

/// The iterate around which a subproblem is linearized.
pub type ExpansionPoint<T> = TrajectoryIterate<T>;

impl<T: Real> TrajectoryIterate<T> {
    pub fn layout(&self) -> Layout {
        Layout::new(self.a.len(), self.alpha.first().map_or(0, |r| r.len()))
    }

    pub fn n_slots(&self) -> usize {
        self.a.len()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let l = self.layout();
        let mut x = vec![T::zero(); l.n_vars()];
        for n in 0..=l.n_slots {
            x[l.q(n, 0)] = self.q[n].x;
            x[l.q(n, 1)] = self.q[n].y;
            x[l.v(n, 0)] = self.v[n].x;
            x[l.v(n, 1)] = self.v[n].y;
        }
        for n in 0..l.n_slots {
            x[l.a(n, 0)] = self.a[n].x;
            x[l.a(n, 1)] = self.a[n].y;
            x[l.theta(n)] = self.theta[n];
        }
        for n in 1..=l.n_slots {
            for j in 0..l.n_stations {
                x[l.alpha(n, j)] = self.alpha[n - 1][j];
                x[l.rho(n, j)] = self.rho[n - 1][j];
            }
        }
        x
    }

    pub fn from_flat(l: Layout, x: &[T]) -> Self {
        assert_eq!(x.len(), l.n_vars());
        let n_slots = l.n_slots;
        Self {
            q: (0..=n_slots).map(|n| Vec2::new(x[l.q(n, 0)], x[l.q(n, 1)])).collect(),
            v: (0..=n_slots).map(|n| Vec2::new(x[l.v(n, 0)], x[l.v(n, 1)])).collect(),
            a: (0..n_slots).map(|n| Vec2::new(x[l.a(n, 0)], x[l.a(n, 1)])).collect(),
            alpha: (1..=n_slots)
                .map(|n| (0..l.n_stations).map(|j| x[l.alpha(n, j)]).collect())
                .collect(),
            theta: (0..n_slots).map(|n| x[l.theta(n)]).collect(),
            rho: (1..=n_slots)
                .map(|n| (0..l.n_stations).map(|j| x[l.rho(n, j)]).collect())
                .collect(),
        }
    }

    /// Replaces every `ρ` by the true squared distance of its slot position.
    pub fn with_true_rho(mut self, sc: &ScaledScenario<T>) -> Self {
        for n in 1..=self.n_slots() {
            for (j, e) in sc.emitters.iter().enumerate() {
                self.rho[n - 1][j] = model::squared_distance(self.q[n], e.position, sc.altitude);
            }
        }
        self
    }

    /// `self + t (other - self)`, componentwise.
    pub fn blend(&self, other: &Self, t: T) -> Self {
        let lerp = |a: T, b: T| a + t * (b - a);
        let lv = |a: &[Vec2<T>], b: &[Vec2<T>]| a.iter().zip(b).map(|(&p, &q)| p.lerp(q, t)).collect();
        let lm = |a: &[Vec<T>], b: &[Vec<T>]| {
            a.iter()
                .zip(b)
                .map(|(r, s)| r.iter().zip(s).map(|(&p, &q)| lerp(p, q)).collect())
                .collect()
        };
        Self {
            q: lv(&self.q, &other.q),
            v: lv(&self.v, &other.v),
            a: lv(&self.a, &other.a),
            alpha: lm(&self.alpha, &other.alpha),
            theta: self.theta.iter().zip(&other.theta).map(|(&p, &q)| lerp(p, q)).collect(),
            rho: lm(&self.rho, &other.rho),
        }
    }

    /// Largest violation of the kinematic recursions, in scaled units.
    pub fn dynamics_residual(&self, tc: T) -> T {
        let half = T::lit(0.5);
        let mut worst = T::zero();
        for n in 1..=self.n_slots() {
            let rq = self.q[n] - self.q[n - 1] - self.v[n - 1] * tc - self.a[n - 1] * (half * tc * tc);
            let rv = self.v[n] - self.v[n - 1] - self.a[n - 1] * tc;
            worst = worst.max(rq.norm()).max(rv.norm());
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig<T> {
    /// Lower bound on `θ`, scaled units.
    pub theta_min: T,
    /// Lower bound on `ρ`, scaled units.
    pub rho_min: T,
    /// Speed smoothing for the `|v|³` term, scaled units.
    pub eps_v: T,
    /// Optional radius for `|Q[n] − Q⁰[n]| ≤ Δ`, scaled units.
    pub trust_region: Option<T>,
    /// Tolerance for the expansion-point feasibility audit.
    pub feasibility_tolerance: T,
}

impl<T: Real> SurrogateConfig<T> {
    /// Defaults for a scaled scenario: `θ_min = 0.1 m/s`, `ρ_min = (H/2)²`,
    /// `ε_v = 1e-6 m/s`, no trust region.
    pub fn for_scenario(sc: &ScaledScenario<T>) -> Self {
        let half_h = T::lit(0.5) * sc.altitude;
        Self {
            theta_min: T::lit(0.1) / sc.length_scale,
            rho_min: half_h * half_h,
            eps_v: T::lit(1e-6) / sc.length_scale,
            trust_region: None,
            feasibility_tolerance: T::lit(1e-8),
        }
    }

    /// Trust-region radius `5 · v_max · T_c`.
    pub fn default_trust_radius(sc: &ScaledScenario<T>) -> T {
        T::lit(5.0) * sc.v_max * sc.slot
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("expansion point violates {constraint} by {violation:e}")]
    InfeasibleExpansion { constraint: String, violation: f64 },
    #[error("expansion point shape mismatch: {0}")]
    Shape(String),
    #[error("expansion point outside a term's domain: {0}")]
    Domain(String),
}

/// `(g^{t-1})`: tangent-plane minorant of `α² + ρ²` at `(α⁰, ρ⁰)`.
pub fn bilinear_lower_bound<T: Real>(alpha: T, rho: T, alpha0: T, rho0: T) -> T {
    let two = T::lit(2.0);
    alpha0 * alpha0 + rho0 * rho0 + two * alpha0 * (alpha - alpha0) + two * rho0 * (rho - rho0)
}

/// `θ² − (|v⁰|² + 2v⁰ᵀ(v − v⁰))` over `(vx, vy, θ)`.
pub fn theta_speed_constraint<T: Real>(v: Vec2<T>, theta: T, v0: Vec2<T>) -> LocalEval<T> {
    let two = T::lit(2.0);
    let zero = T::zero();
    LocalEval {
        value: theta * theta - v0.norm_sq() - two * v0.dot(v - v0),
        grad: vec![-two * v0.x, -two * v0.y, two * theta],
        hess: vec![zero, zero, zero, zero, zero, zero, zero, zero, two],
    }
}

/// Right-hand side of the affine squared-distance link:
/// `|q⁰ − q_j|² + H² + 2(q⁰ − q_j)ᵀ(q − q⁰)`.
pub fn rho_affine_link<T: Real>(q: Vec2<T>, q0: Vec2<T>, station: Vec2<T>, altitude: T) -> T {
    let d0 = q0 - station;
    d0.norm_sq() + altitude * altitude + T::lit(2.0) * d0.dot(q - q0)
}

/// SINR surrogate for station `j` at one slot, over the local variables
/// `(α_j, ρ_0, …, ρ_{J−1})`:
/// `κ[(α_j + ρ_j)² − g] − f_j(ρ)` with `κ = γ/(2h_j)`.
pub fn sinr_surrogate_constraint<T: Real>(
    alpha: T,
    rho: &[T],
    j: usize,
    gains: &[T],
    gamma: T,
    alpha0: T,
    rho0: T,
) -> Result<LocalEval<T>, String> {
    let m = rho.len() + 1;
    let two = T::lit(2.0);
    let kappa = gamma / (two * gains[j]);
    let fd = f_j_gradient_hessian(rho, j, gains).map_err(|e| e.to_string())?;
    let sum = alpha + rho[j];
    let g = bilinear_lower_bound(alpha, rho[j], alpha0, rho0);
    let mut e = LocalEval::zeros(m);
    e.value = kappa * (sum * sum - g) - fd.value;
    e.grad[0] = kappa * (two * sum - two * alpha0);
    e.grad[1 + j] = kappa * (two * sum - two * rho0);
    let rj = 1 + j;
    let two_k = two * kappa;
    e.hess[0] = two_k;
    e.hess[rj] = two_k;
    e.hess[rj * m] = two_k;
    e.hess[rj * m + rj] = two_k;
    let k = fd.indices.len();
    for (a, &ia) in fd.indices.iter().enumerate() {
        e.grad[1 + ia] -= fd.grad[a];
        for (b, &ib) in fd.indices.iter().enumerate() {
            e.hess[(1 + ia) * m + 1 + ib] -= fd.hess[a * k + b];
        }
    }
    Ok(e)
}

struct PowerTerm<T> {
    support: Vec<usize>,
    params: PowerParams<T>,
    eps_v: T,
    slot: usize,
}

impl<T: Real> SmoothTerm<T> for PowerTerm<T> {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[T]) -> Result<LocalEval<T>, String> {
        let d = power_gradient_hessian(Vec2::new(x[0], x[1]), Vec2::new(x[2], x[3]), x[4], &self.params, self.eps_v)
            .map_err(|e| e.to_string())?;
        Ok(LocalEval {
            value: d.value,
            grad: d.grad.to_vec(),
            hess: d.hess.iter().flatten().copied().collect(),
        })
    }

    fn label(&self) -> String {
        format!("power[n={}]", self.slot)
    }
}

struct ThetaSpeedTerm<T> {
    support: Vec<usize>,
    v0: Vec2<T>,
    slot: usize,
}

impl<T: Real> SmoothTerm<T> for ThetaSpeedTerm<T> {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[T]) -> Result<LocalEval<T>, String> {
        Ok(theta_speed_constraint(Vec2::new(x[0], x[1]), x[2], self.v0))
    }

    fn label(&self) -> String {
        format!("theta-speed[n={}]", self.slot)
    }
}

/// `|x|² − r²` over a 2-vector, optionally centred.
struct SquaredNormCap<T> {
    support: Vec<usize>,
    center: Vec2<T>,
    cap: T,
    label: String,
}

impl<T: Real> SmoothTerm<T> for SquaredNormCap<T> {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[T]) -> Result<LocalEval<T>, String> {
        let two = T::lit(2.0);
        let d = Vec2::new(x[0], x[1]) - self.center;
        Ok(LocalEval {
            value: d.norm_sq() - self.cap * self.cap,
            grad: vec![two * d.x, two * d.y],
            hess: vec![two, T::zero(), T::zero(), two],
        })
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

struct SinrTerm<T> {
    support: Vec<usize>,
    j: usize,
    gains: Vec<T>,
    gamma: T,
    alpha0: T,
    rho0: T,
    slot: usize,
}

impl<T: Real> SmoothTerm<T> for SinrTerm<T> {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[T]) -> Result<LocalEval<T>, String> {
        sinr_surrogate_constraint(x[0], &x[1..], self.j, &self.gains, self.gamma, self.alpha0, self.rho0)
    }

    fn label(&self) -> String {
        format!("sinr[n={},j={}]", self.slot, self.j + 1)
    }
}

/// `|q − q_j|² + H² − ρ_j`.
struct ServingDistanceTerm<T> {
    support: Vec<usize>,
    station: Vec2<T>,
    altitude: T,
    slot: usize,
}

impl<T: Real> SmoothTerm<T> for ServingDistanceTerm<T> {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[T]) -> Result<LocalEval<T>, String> {
        let two = T::lit(2.0);
        let d = Vec2::new(x[0], x[1]) - self.station;
        let mut e = LocalEval::zeros(3);
        e.value = d.norm_sq() + self.altitude * self.altitude - x[2];
        e.grad = vec![two * d.x, two * d.y, -T::one()];
        e.hess[0] = two;
        e.hess[4] = two;
        Ok(e)
    }

    fn label(&self) -> String {
        format!("serving distance[n={}]", self.slot)
    }
}

/// SINR surrogate minus the elastic variable stored last in the support.
struct ElasticSinrTerm<T>(SinrTerm<T>);

impl<T: Real> SmoothTerm<T> for ElasticSinrTerm<T> {
    fn support(&self) -> &[usize] {
        &self.0.support
    }

    fn eval(&self, x: &[T]) -> Result<LocalEval<T>, String> {
        let m = x.len();
        let inner = self.0.eval(&x[..m - 1])?;
        let mut e = LocalEval::zeros(m);
        e.value = inner.value - x[m - 1];
        e.grad[..m - 1].copy_from_slice(&inner.grad);
        e.grad[m - 1] = -T::one();
        for r in 0..m - 1 {
            e.hess[r * m..r * m + m - 1].copy_from_slice(&inner.hess[r * (m - 1)..(r + 1) * (m - 1)]);
        }
        Ok(e)
    }

    fn label(&self) -> String {
        format!("elastic {}", self.0.label())
    }
}

/// The assembled convex subproblem together with its variable layout.
pub struct ConvexSubproblem<T: Real> {
    pub layout: Layout,
    pub problem: ConvexProblem<T>,
}

impl<T: Real> ConvexSubproblem<T> {
    pub fn n_vars(&self) -> usize {
        self.layout.n_vars()
    }
}

fn check_shapes<T: Real>(exp: &ExpansionPoint<T>, sc: &ScaledScenario<T>) -> Result<Layout, AssemblyError> {
    let n = sc.n_slots;
    let j = sc.n_stations();
    let bad = |what: &str| Err(AssemblyError::Shape(what.to_string()));
    if exp.q.len() != n + 1 || exp.v.len() != n + 1 {
        return bad("Q and v need N+1 entries");
    }
    if exp.a.len() != n || exp.theta.len() != n {
        return bad("a and theta need N entries");
    }
    if exp.alpha.len() != n || exp.rho.len() != n {
        return bad("alpha and rho need N rows");
    }
    if exp.alpha.iter().chain(&exp.rho).any(|r| r.len() != j) {
        return bad("alpha and rho rows need J entries");
    }
    Ok(Layout::new(n, j))
}

/// Builds the convex subproblem linearized at `exp` and audits that `exp`
/// is feasible for it.
pub fn assemble<T: Real>(
    exp: &ExpansionPoint<T>,
    sc: &ScaledScenario<T>,
    cfg: &SurrogateConfig<T>,
) -> Result<ConvexSubproblem<T>, AssemblyError> {
    let p = build(exp, sc, cfg, None)?;
    audit_expansion_point(&p.problem, &exp.to_flat(), cfg.feasibility_tolerance)?;
    Ok(p)
}

/// Phase-one subproblem used to reach a connected trajectory.
///
/// The association is frozen to `serving` (zero-based, one entry per slot
/// `1..=N`) and the serving station's SINR constraint in slot `n` is relaxed
/// by an elastic variable `s_n ≥ 0`. The serving distance enters through
/// `ρ_j ≥ |q − q_j|² + H²` instead of its linearization, so `s_n = 0` implies
/// the true constraint. The objective is the smoothed power
/// plus `weight · Σ s_n`. The elastic variables follow the trajectory
/// variables in the flat vector.
pub struct RestorationSubproblem<T: Real> {
    pub sub: ConvexSubproblem<T>,
    /// Expansion point extended with elastic values that make it feasible.
    pub start: Vec<T>,
}

impl<T: Real> RestorationSubproblem<T> {
    pub fn elastic<'a>(&self, x: &'a [T]) -> &'a [T] {
        &x[self.sub.layout.n_vars()..]
    }
}

pub fn assemble_restoration<T: Real>(
    exp: &ExpansionPoint<T>,
    sc: &ScaledScenario<T>,
    cfg: &SurrogateConfig<T>,
    serving: &[usize],
    weight: T,
) -> Result<RestorationSubproblem<T>, AssemblyError> {
    let n_st = sc.n_stations();
    if serving.len() != sc.n_slots || serving.iter().any(|&j| j >= n_st) {
        return Err(AssemblyError::Shape("association needs one valid station per slot".into()));
    }
    let sub = build(exp, sc, cfg, Some((serving, weight)))?;
    let l = sub.layout;
    let mut start = exp.to_flat();
    let gains = sc.gains();
    for n in 1..=l.n_slots {
        let j = serving[n - 1];
        let v = if sc.gamma_min > T::zero() {
            let e = sinr_surrogate_constraint(
                exp.alpha[n - 1][j],
                &exp.rho[n - 1],
                j,
                &gains,
                sc.gamma_min,
                exp.alpha[n - 1][j],
                exp.rho[n - 1][j],
            )
            .map_err(AssemblyError::Domain)?;
            e.value
        } else {
            T::zero()
        };
        start.push(v.max(T::zero()) + T::lit(1e-3));
    }
    audit_expansion_point(&sub.problem, &start, cfg.feasibility_tolerance)?;
    Ok(RestorationSubproblem { sub, start })
}

fn build<T: Real>(
    exp: &ExpansionPoint<T>,
    sc: &ScaledScenario<T>,
    cfg: &SurrogateConfig<T>,
    restore: Option<(&[usize], T)>,
) -> Result<ConvexSubproblem<T>, AssemblyError> {
    let l = check_shapes(exp, sc)?;
    let n_slots = l.n_slots;
    let n_st = l.n_stations;
    let n_elastic = if restore.is_some() { n_slots } else { 0 };
    let elastic = |n: usize| l.n_vars() + n - 1;
    let mut p = ConvexProblem::new(l.n_vars() + n_elastic);
    let tc = sc.slot;
    let half_tc2 = T::lit(0.5) * tc * tc;
    let one = T::one();
    let two = T::lit(2.0);
    let lambda = sc.penalty_lambda;

    // Objective.
    for n in 0..n_slots {
        p.add_objective(PowerTerm {
            support: vec![l.v(n, 0), l.v(n, 1), l.a(n, 0), l.a(n, 1), l.theta(n)],
            params: sc.power,
            eps_v: cfg.eps_v,
            slot: n,
        });
    }
    match restore {
        None => {
            for n in 1..=n_slots {
                for j in 0..n_st {
                    let a0 = exp.alpha[n - 1][j];
                    p.linear_cost[l.alpha(n, j)] = lambda * (one - two * a0);
                    p.constant += lambda * a0 * a0;
                }
            }
        }
        Some((_, weight)) => {
            for n in 1..=n_slots {
                p.linear_cost[elastic(n)] = weight;
            }
        }
    }

    // Endpoints and kinematics.
    for c in 0..2 {
        let (qs, qf, v0) = (sc.q_start.to_array()[c], sc.q_final.to_array()[c], sc.v0.to_array()[c]);
        p.add_equality(vec![(l.q(0, c), one)], qs, format!("start position[{c}]"));
        p.add_equality(vec![(l.v(0, c), one)], v0, format!("start velocity[{c}]"));
        p.add_equality(vec![(l.q(n_slots, c), one)], qf, format!("final position[{c}]"));
    }
    for n in 1..=n_slots {
        for c in 0..2 {
            p.add_equality(
                vec![
                    (l.q(n, c), one),
                    (l.q(n - 1, c), -one),
                    (l.v(n - 1, c), -tc),
                    (l.a(n - 1, c), -half_tc2),
                ],
                T::zero(),
                format!("position dynamics[n={n},{c}]"),
            );
            p.add_equality(
                vec![(l.v(n, c), one), (l.v(n - 1, c), -one), (l.a(n - 1, c), -tc)],
                T::zero(),
                format!("velocity dynamics[n={n},{c}]"),
            );
        }
    }

    // Association and distance links.
    for n in 1..=n_slots {
        match restore {
            None => p.add_equality(
                (0..n_st).map(|j| (l.alpha(n, j), one)).collect(),
                one,
                format!("association sum[n={n}]"),
            ),
            Some((serving, _)) => {
                for j in 0..n_st {
                    let target = if j == serving[n - 1] { one } else { T::zero() };
                    p.add_equality(vec![(l.alpha(n, j), one)], target, format!("frozen association[n={n},j={}]", j + 1));
                }
            }
        }
        let q0 = exp.q[n];
        for (j, e) in sc.emitters.iter().enumerate() {
            let d0 = q0 - e.position;
            // ρ − 2d0ᵀq = |d0|² + H² − 2d0ᵀq0
            if let Some((serving, _)) = restore {
                if j == serving[n - 1] {
                    p.add_inequality(ServingDistanceTerm {
                        support: vec![l.q(n, 0), l.q(n, 1), l.rho(n, j)],
                        station: e.position,
                        altitude: sc.altitude,
                        slot: n,
                    });
                    continue;
                }
            }
            let rhs = rho_affine_link(Vec2::zero(), q0, e.position, sc.altitude);
            p.add_equality(
                vec![(l.rho(n, j), one), (l.q(n, 0), -two * d0.x), (l.q(n, 1), -two * d0.y)],
                rhs,
                format!("distance link[n={n},j={}]", j + 1),
            );
        }
    }

    // Inequalities.
    for n in 0..n_slots {
        p.add_inequality(ThetaSpeedTerm {
            support: vec![l.v(n, 0), l.v(n, 1), l.theta(n)],
            v0: exp.v[n],
            slot: n,
        });
        p.add_inequality(SquaredNormCap {
            support: vec![l.a(n, 0), l.a(n, 1)],
            center: Vec2::zero(),
            cap: sc.a_max,
            label: format!("acceleration cap[n={n}]"),
        });
        p.add_lower_bound(l.theta(n), cfg.theta_min, format!("theta floor[n={n}]"));
    }
    for n in 1..=n_slots {
        p.add_inequality(SquaredNormCap {
            support: vec![l.v(n, 0), l.v(n, 1)],
            center: Vec2::zero(),
            cap: sc.v_max,
            label: format!("speed cap[n={n}]"),
        });
    }
    let gains = sc.gains();
    for n in 1..=n_slots {
        if restore.is_some() {
            p.add_lower_bound(elastic(n), T::zero(), format!("elastic floor[n={n}]"));
        }
        for j in 0..n_st {
            p.add_lower_bound(l.rho(n, j), cfg.rho_min, format!("rho floor[n={n},j={}]", j + 1));
            if let Some((serving, _)) = restore {
                if sc.gamma_min > T::zero() && j == serving[n - 1] {
                    let mut support = vec![l.alpha(n, j)];
                    support.extend((0..n_st).map(|k| l.rho(n, k)));
                    support.push(elastic(n));
                    p.add_inequality(ElasticSinrTerm(SinrTerm {
                        support,
                        j,
                        gains: gains.clone(),
                        gamma: sc.gamma_min,
                        alpha0: one,
                        rho0: exp.rho[n - 1][j],
                        slot: n,
                    }));
                }
                continue;
            }
            p.add_lower_bound(l.alpha(n, j), T::zero(), format!("alpha floor[n={n},j={}]", j + 1));
            if sc.gamma_min > T::zero() {
                let mut support = vec![l.alpha(n, j)];
                support.extend((0..n_st).map(|k| l.rho(n, k)));
                p.add_inequality(SinrTerm {
                    support,
                    j,
                    gains: gains.clone(),
                    gamma: sc.gamma_min,
                    alpha0: exp.alpha[n - 1][j],
                    rho0: exp.rho[n - 1][j],
                    slot: n,
                });
            }
        }
    }
    if let Some(radius) = cfg.trust_region {
        for n in 1..n_slots {
            p.add_inequality(SquaredNormCap {
                support: vec![l.q(n, 0), l.q(n, 1)],
                center: exp.q[n],
                cap: radius,
                label: format!("trust region[n={n}]"),
            });
        }
    }

    Ok(ConvexSubproblem { layout: l, problem: p })
}

fn audit_expansion_point<T: Real>(p: &ConvexProblem<T>, x: &[T], tol: T) -> Result<(), AssemblyError> {
    for eq in &p.equalities {
        let r = eq.residual(x);
        if !(r.abs() <= tol) {
            return Err(AssemblyError::InfeasibleExpansion {
                constraint: eq.label.clone(),
                violation: r.abs().to_f64_lossy(),
            });
        }
    }
    for t in &p.inequalities {
        let local: Vec<T> = t.support().iter().map(|&i| x[i]).collect();
        let v = t.eval(&local).map_err(|e| AssemblyError::Domain(format!("{}: {e}", t.label())))?.value;
        if !(v <= tol) {
            return Err(AssemblyError::InfeasibleExpansion {
                constraint: t.label(),
                violation: v.to_f64_lossy(),
            });
        }
    }
    p.objective_value(x).map_err(AssemblyError::Domain)?;
    Ok(())
}

/// Surrogate objective at `x`: smoothed power plus the penalty linearized
/// at `exp`.
pub fn surrogate_objective<T: Real>(sub: &ConvexSubproblem<T>, x: &[T]) -> Result<T, String> {
    sub.problem.objective_value(x)
}

/// Power with the slack `θ` plus `λ Σ (α − α²)`.
pub fn exact_penalized_objective<T: Real>(it: &TrajectoryIterate<T>, sc: &ScaledScenario<T>) -> Result<T, String> {
    Ok(slack_power(it, sc)? + sc.penalty_lambda * penalty_residual(it))
}

/// `Σ_n P(v[n], a[n], θ[n])` in scaled units.
pub fn slack_power<T: Real>(it: &TrajectoryIterate<T>, sc: &ScaledScenario<T>) -> Result<T, String> {
    let mut s = T::zero();
    for n in 0..it.n_slots() {
        s += model::power_slack(it.v[n], it.a[n], it.theta[n], &sc.power)
            .map_err(|e| e.to_string())?
            .total;
    }
    Ok(s)
}

/// `Σ (α − α²)`, zero exactly when every `α` is binary.
pub fn penalty_residual<T: Real>(it: &TrajectoryIterate<T>) -> T {
    it.alpha.iter().flatten().map(|&a| a - a * a).sum()
}

/// Largest distance of any `α` from `{0, 1}`.
pub fn max_binary_gap<T: Real>(it: &TrajectoryIterate<T>) -> T {
    it.alpha
        .iter()
        .flatten()
        .fold(T::zero(), |m, &a| m.max(a.abs().min((T::one() - a).abs())))
}

/// Worst value of the pre-linearization SINR constraint
/// `(γ/h_j) α_j ρ_j − f_j(ρ)` over all slots and stations, using the true
/// squared distances of the iterate's positions.
pub fn true_sinr_violation<T: Real>(it: &TrajectoryIterate<T>, sc: &ScaledScenario<T>) -> T {
    if !(sc.gamma_min > T::zero()) {
        return T::neg_infinity();
    }
    let gains = sc.gains();
    let mut worst = T::neg_infinity();
    for n in 1..=it.n_slots() {
        let rho: Vec<T> = sc
            .emitters
            .iter()
            .map(|e| model::squared_distance(it.q[n], e.position, sc.altitude))
            .collect();
        for j in 0..gains.len() {
            let f = model::f_j(&rho, j, &gains).expect("true distances are positive");
            let v = sc.gamma_min / gains[j] * it.alpha[n - 1][j] * rho[j] - f;
            worst = worst.max(v);
        }
    }
    worst
}

/// Recomputes `Q` and `v` from `a` by the exact recursions and corrects the
/// last acceleration so that `Q[N]` lands on the goal.
pub fn rebuild_kinematics<T: Real>(it: &mut TrajectoryIterate<T>, q0: Vec2<T>, v0: Vec2<T>, goal: Vec2<T>, tc: T) {
    let n_slots = it.a.len();
    let half_tc2 = T::lit(0.5) * tc * tc;
    let forward = |it: &mut TrajectoryIterate<T>| {
        it.q = vec![q0];
        it.v = vec![v0];
        for n in 0..n_slots {
            let q = it.q[n] + it.v[n] * tc + it.a[n] * half_tc2;
            let v = it.v[n] + it.a[n] * tc;
            it.q.push(q);
            it.v.push(v);
        }
    };
    forward(it);
    let miss = goal - it.q[n_slots];
    it.a[n_slots - 1] += miss * half_tc2.recip();
    forward(it);
    it.q[n_slots] = goal;
}

/// Makes a subproblem solution an exact expansion point: kinematics rebuilt
/// from the accelerations, `α` projected onto the simplex, `θ` capped by the
/// speed, and `ρ` set to the true squared distances.
pub fn regularize<T: Real>(mut it: TrajectoryIterate<T>, sc: &ScaledScenario<T>, theta_min: T) -> TrajectoryIterate<T> {
    rebuild_kinematics(&mut it, sc.q_start, sc.v0, sc.q_final, sc.slot);
    for row in &mut it.alpha {
        for a in row.iter_mut() {
            *a = a.max(T::zero());
        }
        let s: T = row.iter().copied().sum();
        if s > T::zero() {
            for a in row.iter_mut() {
                *a /= s;
            }
        }
    }
    for (n, th) in it.theta.iter_mut().enumerate() {
        *th = th.min(it.v[n].norm()).max(theta_min);
    }
    it.with_true_rho(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::map1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_counts() {
        let l = Layout::new(10, 5);
        assert_eq!(l.n_vars(), 2 * 11 + 2 * 11 + 2 * 10 + 10 * 5 + 10 + 10 * 5);
        assert_eq!(l.n_vars(), 174);
        assert_eq!(l.rho(10, 4), 173);
        let mut seen = vec![false; l.n_vars()];
        for n in 0..=10 {
            for c in 0..2 {
                seen[l.q(n, c)] = true;
                seen[l.v(n, c)] = true;
                if n < 10 {
                    seen[l.a(n, c)] = true;
                }
            }
            if n < 10 {
                seen[l.theta(n)] = true;
            }
            if n >= 1 {
                for j in 0..5 {
                    seen[l.alpha(n, j)] = true;
                    seen[l.rho(n, j)] = true;
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn theta_speed_examples() {
        let v0 = Vec2::new(3.0, 4.0);
        assert_eq!(theta_speed_constraint(v0, 5.0, v0).value, 0.0);
        assert_eq!(theta_speed_constraint(v0, 4.0, v0).value, -9.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut hits = 0;
        while hits < 100 {
            let v0 = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let v = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let th: f64 = rng.gen_range(0.0..6.0);
            if theta_speed_constraint(v, th, v0).value <= 0.0 {
                hits += 1;
                assert!(v.norm_sq() >= th * th - 1e-12);
            }
        }
    }

    #[test]
    fn rho_link_underestimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let st = Vec2::new(1.0f64, -2.0);
        let q0 = Vec2::new(0.3, 0.4);
        assert!((rho_affine_link(q0, q0, st, 0.5) - model::squared_distance(q0, st, 0.5)).abs() < 1e-15);
        for _ in 0..100 {
            let q = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let lin = rho_affine_link(q, q0, st, 0.5);
            let exact = model::squared_distance(q, st, 0.5);
            assert!(lin <= exact + 1e-12);
            assert!((exact - lin - (q - q0).norm_sq()).abs() < 1e-10);
        }
    }

    #[test]
    fn bilinear_bound_slack_is_squared_displacement() {
        assert_eq!(bilinear_lower_bound(0.3, 2.0, 0.3, 2.0), 0.09 + 4.0);
        assert_eq!(bilinear_lower_bound(0.7, 3.0, 0.0, 0.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let (a, r, a0, r0): (f64, f64, f64, f64) =
                (rng.gen(), rng.gen_range(0.0..10.0), rng.gen(), rng.gen_range(0.0..10.0));
            let slack = a * a + r * r - bilinear_lower_bound(a, r, a0, r0);
            assert!(slack >= -1e-12);
            assert!((slack - (a - a0).powi(2) - (r - r0).powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn sinr_surrogate_non_serving_is_slack() {
        let gains = [4.0f64, 2.0, 1.0];
        let rho = [1.5, 2.0, 0.7];
        let e = sinr_surrogate_constraint(0.0, &rho, 1, &gains, 2.0, 0.0, rho[1]).unwrap();
        let f = model::f_j(&rho, 1, &gains).unwrap();
        assert!((e.value + f).abs() < 1e-15);
    }

    #[test]
    fn sinr_surrogate_single_station() {
        let (h, g, rho) = (50.0f64, 2.0f64, 3.0f64);
        let e = sinr_surrogate_constraint(0.4, &[rho], 0, &[h], g, 0.5, 2.5).unwrap();
        let expected = g / (2.0 * h) * ((0.4 + rho).powi(2) - bilinear_lower_bound(0.4, rho, 0.5, 2.5)) - 1.0;
        assert!((e.value - expected).abs() < 1e-14);
    }

    #[test]
    fn assembled_counts_for_bundled_map() {
        let sc = map1().nondimensionalize();
        let l = Layout::new(sc.n_slots, sc.n_stations());
        assert_eq!(l.n_vars(), 174);
    }
}
