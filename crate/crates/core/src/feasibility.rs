//! Connectivity feasibility: the coverage-disk chain test, a brute-force grid
//! oracle on the true SINR field, and construction of a feasible starting
//! iterate for the SCA loop.

use log::debug;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{project_to_disk, Vec2};
use crate::model::{self, Emitter};
use crate::scalar::Real;
use crate::scenario::{ScaledScenario, Scenario};
use crate::solver::{self, ConvexProblem, FnTerm, LocalEval, SolverConfig, SolverStatus};
use crate::surrogate::{
    assemble_restoration, rebuild_kinematics, regularize, slack_power, true_sinr_violation, SurrogateConfig,
    TrajectoryIterate,
};

/// Per-slot serving stations `k_1..k_N`, zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssociationVector {
    pub serving: Vec<usize>,
}

impl AssociationVector {
    pub fn one_based(&self) -> Vec<usize> {
        self.serving.iter().map(|k| k + 1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibilityMethod {
    CircleGraph,
    GridOracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCertificate<T> {
    pub feasible: bool,
    pub association: Option<AssociationVector>,
    /// Positions at `t_0..t_N` in meters.
    pub waypoints: Option<Vec<Vec2<T>>>,
    pub method: FeasibilityMethod,
    /// Interference level behind the coverage radii (circle graph), or the
    /// largest serving-station interference over covered cells (grid).
    pub interference_bound: Option<T>,
    /// Smallest true SINR of the association along the waypoints.
    pub min_true_sinr: Option<T>,
    pub note: String,
}

impl<T: Real> FeasibilityCertificate<T> {
    fn infeasible(method: FeasibilityMethod, note: impl Into<String>) -> Self {
        Self {
            feasible: false,
            association: None,
            waypoints: None,
            method,
            interference_bound: None,
            min_true_sinr: None,
            note: note.into(),
        }
    }

    /// Distance of the farthest waypoint from the start→goal segment.
    pub fn max_chord_deviation(&self) -> Option<T> {
        let w = self.waypoints.as_ref()?;
        let (a, b) = (*w.first()?, *w.last()?);
        Some(w.iter().fold(T::zero(), |m, &p| m.max(crate::geometry::distance_to_segment(p, a, b))))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeasibilityError {
    #[error("grid of {cells} cells exceeds the budget of {budget}")]
    Resource { cells: usize, budget: usize },
    #[error("grid step must be positive")]
    InvalidGridStep,
    #[error("initialization failed: {0}")]
    Initialization(String),
}

fn straight_waypoints<T: Real>(sc: &Scenario<T>) -> Vec<Vec2<T>> {
    let n = sc.n_slots();
    (0..=n)
        .map(|k| sc.q_start.lerp(sc.q_final, T::lit(k as f64) / T::lit(n as f64)))
        .collect()
}

fn best_station_at<T: Real>(p: Vec2<T>, emitters: &[Emitter<T>], h: T) -> usize {
    model::best_station(p, emitters, h).map_or(0, |b| b.serving)
}

/// Smallest true SINR of `association` along waypoints `1..=N`.
fn min_sinr_along<T: Real>(sc: &Scenario<T>, assoc: &AssociationVector, waypoints: &[Vec2<T>]) -> Option<T> {
    let emitters = sc.emitters();
    if emitters.is_empty() {
        return None;
    }
    let h = sc.vehicle.altitude_h;
    Some(
        assoc
            .serving
            .iter()
            .enumerate()
            .map(|(k, &j)| model::sinr(waypoints[k + 1], j, &emitters, h).sinr)
            .fold(T::infinity(), |a, b| a.min(b)),
    )
}

fn trivial_certificate<T: Real>(sc: &Scenario<T>, method: FeasibilityMethod) -> FeasibilityCertificate<T> {
    let w = straight_waypoints(sc);
    let emitters = sc.emitters();
    let h = sc.vehicle.altitude_h;
    let assoc = AssociationVector {
        serving: w[1..].iter().map(|&p| best_station_at(p, &emitters, h)).collect(),
    };
    let min_sinr = min_sinr_along(sc, &assoc, &w);
    FeasibilityCertificate {
        feasible: true,
        association: Some(assoc),
        waypoints: Some(w),
        method,
        interference_bound: None,
        min_true_sinr: min_sinr,
        note: "zero SINR threshold: every position is connected".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleGraphConfig {
    /// Association vectors tried before giving up.
    pub max_paths: usize,
    pub projection_sweeps: usize,
}

impl Default for CircleGraphConfig {
    fn default() -> Self {
        Self {
            max_paths: 4096,
            projection_sweeps: 4000,
        }
    }
}

pub fn circle_graph_check<T: Real>(sc: &Scenario<T>, interference_bound: T) -> FeasibilityCertificate<T> {
    circle_graph_check_with(sc, interference_bound, &CircleGraphConfig::default())
}

/// Coverage-disk chain test.
///
/// Builds the layered graph over `(slot, station)` whose edges satisfy the
/// pairwise disk-distance conditions, then realizes candidate association
/// vectors as concrete waypoint chains (one point per disk, consecutive
/// points at most `d0 = v_max T_c` apart) by alternating projections. The
/// pairwise conditions alone are necessary but not sufficient, so only a
/// realized chain counts as a certificate. Because `Q[N]` is pinned to the
/// goal, the goal itself must lie in the last slot's disk.
pub fn circle_graph_check_with<T: Real>(
    sc: &Scenario<T>,
    interference_bound: T,
    cfg: &CircleGraphConfig,
) -> FeasibilityCertificate<T> {
    let method = FeasibilityMethod::CircleGraph;
    if !(sc.gamma_min > T::zero()) {
        return trivial_certificate(sc, method);
    }
    let stations = &sc.stations;
    if stations.is_empty() {
        return FeasibilityCertificate::infeasible(method, "no ground stations");
    }
    let n_slots = sc.n_slots();
    let d0 = sc.max_slot_distance();
    let h = sc.vehicle.altitude_h;
    let radii: Vec<Option<T>> = stations
        .iter()
        .map(|s| model::coverage_radius(s.reference_snr(), sc.gamma_min, interference_bound, h))
        .collect();
    let centers: Vec<Vec2<T>> = stations.iter().map(|s| s.position).collect();
    let js = stations.len();

    let first_ok = |j: usize| radii[j].is_some_and(|r| (centers[j] - sc.q_start).norm() <= r + d0);
    let last_ok = |j: usize| radii[j].is_some_and(|r| (centers[j] - sc.q_final).norm() <= r);
    let edge = |i: usize, j: usize| match (radii[i], radii[j]) {
        (Some(ri), Some(rj)) => (centers[j] - centers[i]).norm() <= ri + rj + d0,
        _ => false,
    };

    // alive[n][j] for n = 0..N-1 (slot n+1).
    let mut alive = vec![vec![false; js]; n_slots];
    for j in 0..js {
        alive[0][j] = first_ok(j);
    }
    for n in 1..n_slots {
        for j in 0..js {
            alive[n][j] = radii[j].is_some() && (0..js).any(|i| alive[n - 1][i] && edge(i, j));
        }
    }
    for j in 0..js {
        alive[n_slots - 1][j] = alive[n_slots - 1][j] && last_ok(j);
    }
    for n in (0..n_slots - 1).rev() {
        for j in 0..js {
            alive[n][j] = alive[n][j] && (0..js).any(|k| alive[n + 1][k] && edge(j, k));
        }
    }
    if !alive[0].iter().any(|&a| a) {
        let mut c = FeasibilityCertificate::infeasible(method, "no association vector satisfies the disk chain conditions");
        c.interference_bound = Some(interference_bound);
        return c;
    }

    // Depth-first over association vectors, lowest station index first.
    let mut tried = 0usize;
    let mut path = Vec::with_capacity(n_slots);
    let mut found = None;
    dfs(&alive, &edge, &mut path, &mut tried, cfg.max_paths, &mut |assoc: &[usize]| {
        let disks: Vec<(Vec2<T>, T)> = assoc.iter().map(|&j| (centers[j], radii[j].unwrap())).collect();
        realize_chain(sc.q_start, sc.q_final, &disks, d0, cfg.projection_sweeps).map(|w| {
            found = Some((assoc.to_vec(), w));
        })
    });

    match found {
        Some((serving, waypoints)) => {
            let assoc = AssociationVector { serving };
            let min_sinr = min_sinr_along(sc, &assoc, &waypoints);
            FeasibilityCertificate {
                feasible: true,
                association: Some(assoc),
                waypoints: Some(waypoints),
                method,
                interference_bound: Some(interference_bound),
                min_true_sinr: min_sinr,
                note: format!("realized after {tried} candidate association(s)"),
            }
        }
        None => {
            let mut c = FeasibilityCertificate::infeasible(
                method,
                format!("disk chain conditions hold but none of {tried} association(s) admits a waypoint chain"),
            );
            c.interference_bound = Some(interference_bound);
            c
        }
    }
}

fn dfs(
    alive: &[Vec<bool>],
    edge: &dyn Fn(usize, usize) -> bool,
    path: &mut Vec<usize>,
    tried: &mut usize,
    max_paths: usize,
    accept: &mut dyn FnMut(&[usize]) -> Option<()>,
) -> bool {
    let n = path.len();
    if n == alive.len() {
        *tried += 1;
        return accept(path).is_some();
    }
    for j in 0..alive[n].len() {
        if *tried >= max_paths {
            return false;
        }
        if !alive[n][j] || (n > 0 && !edge(path[n - 1], j)) {
            continue;
        }
        path.push(j);
        if dfs(alive, edge, path, tried, max_paths, accept) {
            return true;
        }
        path.pop();
    }
    false
}

/// Finds `W_1..W_{N-1}` with `W_n` in disk `n` and every consecutive gap in
/// `W_0 = start, …, W_N = goal` at most `d0`. Returns all `N+1` points.
fn realize_chain<T: Real>(
    start: Vec2<T>,
    goal: Vec2<T>,
    disks: &[(Vec2<T>, T)],
    d0: T,
    sweeps: usize,
) -> Option<Vec<Vec2<T>>> {
    let n = disks.len();
    let mut w: Vec<Vec2<T>> = (0..=n)
        .map(|k| start.lerp(goal, T::lit(k as f64) / T::lit(n as f64)))
        .collect();
    for k in 1..n {
        w[k] = project_to_disk(w[k], disks[k - 1].0, disks[k - 1].1);
    }
    let half = T::lit(0.5);
    let scale = d0.max(T::one());
    let tol = scale * T::lit(1e-9);
    let violation = |w: &[Vec2<T>]| {
        let mut worst = T::zero();
        for k in 1..=n {
            worst = worst.max((w[k] - w[k - 1]).norm() - d0);
            worst = worst.max((w[k] - disks[k - 1].0).norm() - disks[k - 1].1);
        }
        worst
    };
    for _ in 0..sweeps {
        for k in 1..=n {
            let gap = w[k] - w[k - 1];
            let len = gap.norm();
            if len > d0 {
                let excess = gap * ((len - d0) / len);
                match (k - 1 == 0, k == n) {
                    (true, true) => {}
                    (true, false) => w[k] -= excess,
                    (false, true) => w[k - 1] += excess,
                    (false, false) => {
                        w[k] -= excess * half;
                        w[k - 1] += excess * half;
                    }
                }
            }
        }
        for k in 1..n {
            w[k] = project_to_disk(w[k], disks[k - 1].0, disks[k - 1].1);
        }
        if violation(&w) <= tol {
            return Some(w);
        }
    }
    None
}

/// Uniform grid of cell centres covering a rectangle.
#[derive(Debug, Clone)]
struct Grid<T> {
    origin: Vec2<T>,
    step: T,
    nx: usize,
    ny: usize,
}

impl<T: Real> Grid<T> {
    fn covering(lo: Vec2<T>, hi: Vec2<T>, step: T, budget: usize) -> Result<Self, FeasibilityError> {
        if !(step > T::zero()) {
            return Err(FeasibilityError::InvalidGridStep);
        }
        let nx = ((hi.x - lo.x) / step).floor().to_f64_lossy() as usize + 1;
        let ny = ((hi.y - lo.y) / step).floor().to_f64_lossy() as usize + 1;
        let cells = nx.saturating_mul(ny);
        if cells > budget {
            return Err(FeasibilityError::Resource { cells, budget });
        }
        Ok(Self { origin: lo, step, nx, ny })
    }

    fn len(&self) -> usize {
        self.nx * self.ny
    }

    fn center(&self, idx: usize) -> Vec2<T> {
        let (i, j) = (idx % self.nx, idx / self.nx);
        self.origin + Vec2::new(T::lit(i as f64) * self.step, T::lit(j as f64) * self.step)
    }

    fn ij(&self, idx: usize) -> (i64, i64) {
        ((idx % self.nx) as i64, (idx / self.nx) as i64)
    }

    fn index(&self, i: i64, j: i64) -> Option<usize> {
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            None
        } else {
            Some(j as usize * self.nx + i as usize)
        }
    }

    /// Cell offsets whose centres lie within `radius` of the origin cell.
    fn offsets_within(&self, radius: T) -> Vec<(i64, i64)> {
        let k = (radius / self.step).floor().to_f64_lossy() as i64;
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dj in -k..=k {
            for di in -k..=k {
                let d2 = T::lit((di * di + dj * dj) as f64) * self.step * self.step;
                if d2 <= r2 {
                    out.push((di, dj));
                }
            }
        }
        out
    }
}

/// Bounding box of stations and endpoints, padded so that every position
/// reachable within the horizon near a station is inside.
fn search_box<T: Real>(sc: &Scenario<T>) -> (Vec2<T>, Vec2<T>) {
    let mut lo = sc.q_start;
    let mut hi = sc.q_start;
    let mut grow = |p: Vec2<T>| {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    };
    grow(sc.q_final);
    for s in &sc.stations {
        grow(s.position);
    }
    let h = sc.vehicle.altitude_h;
    let reach = T::lit(sc.n_slots() as f64) * sc.max_slot_distance();
    let coverage = sc
        .stations
        .iter()
        .filter_map(|s| model::coverage_radius(s.reference_snr(), sc.gamma_min.max(T::lit(1e-12)), T::zero(), h))
        .fold(T::zero(), |a, b| a.max(b));
    let pad = reach.min(coverage).max(sc.max_slot_distance());
    let pad = Vec2::new(pad, pad);
    (lo - pad, hi + pad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOracleConfig<T> {
    pub grid_step: T,
    pub max_cells: usize,
    /// Per-slot travel distance; defaults to `v_max T_c` when `None`.
    pub slot_distance: Option<T>,
}

impl<T: Real> GridOracleConfig<T> {
    pub fn new(grid_step: T) -> Self {
        Self {
            grid_step,
            max_cells: 4_000_000,
            slot_distance: None,
        }
    }
}

pub fn grid_oracle_check<T: Real>(sc: &Scenario<T>, grid_step: T) -> Result<FeasibilityCertificate<T>, FeasibilityError> {
    grid_oracle_check_with(sc, &GridOracleConfig::new(grid_step))
}

/// Brute-force feasibility on the true SINR field.
///
/// A cell is covered when some station reaches the threshold at its centre
/// with full interference. Slot `n` may occupy any covered cell within one
/// slot distance of a slot `n−1` cell; slot 0 is the exact start point and
/// slot `N` the exact goal.
pub fn grid_oracle_check_with<T: Real>(
    sc: &Scenario<T>,
    cfg: &GridOracleConfig<T>,
) -> Result<FeasibilityCertificate<T>, FeasibilityError> {
    let method = FeasibilityMethod::GridOracle;
    if !(cfg.grid_step > T::zero()) {
        return Err(FeasibilityError::InvalidGridStep);
    }
    if !(sc.gamma_min > T::zero()) {
        return Ok(trivial_certificate(sc, method));
    }
    let emitters = sc.emitters();
    if emitters.is_empty() {
        return Ok(FeasibilityCertificate::infeasible(method, "no ground stations"));
    }
    let h = sc.vehicle.altitude_h;
    let gamma = sc.gamma_min;
    let d0 = cfg.slot_distance.unwrap_or_else(|| sc.max_slot_distance());
    let n_slots = sc.n_slots();
    let (lo, hi) = search_box(sc);
    let grid = Grid::covering(lo, hi, cfg.grid_step, cfg.max_cells)?;

    let mut covered = vec![false; grid.len()];
    let mut serving = vec![0usize; grid.len()];
    let mut max_interference = T::zero();
    for (idx, cov) in covered.iter_mut().enumerate() {
        if let Some(b) = model::best_station(grid.center(idx), &emitters, h) {
            if b.sinr >= gamma {
                *cov = true;
                serving[idx] = b.serving;
                max_interference = max_interference.max(b.interference);
            }
        }
    }

    let goal_sinr = model::best_station(sc.q_final, &emitters, h).map(|b| b.sinr).unwrap_or(T::zero());
    let goal_ok = goal_sinr >= gamma;
    let cert_fail = |note: String| {
        let mut c = FeasibilityCertificate::infeasible(method, note);
        c.interference_bound = Some(max_interference);
        Ok(c)
    };
    if !goal_ok {
        return cert_fail("goal position is not covered".into());
    }
    if n_slots == 1 {
        if (sc.q_final - sc.q_start).norm() <= d0 {
            let w = vec![sc.q_start, sc.q_final];
            let assoc = AssociationVector {
                serving: vec![best_station_at(sc.q_final, &emitters, h)],
            };
            let min_sinr = min_sinr_along(sc, &assoc, &w);
            return Ok(FeasibilityCertificate {
                feasible: true,
                association: Some(assoc),
                waypoints: Some(w),
                method,
                interference_bound: Some(max_interference),
                min_true_sinr: min_sinr,
                note: String::new(),
            });
        }
        return cert_fail("goal farther than one slot distance".into());
    }

    // layers[n-1] = reachable covered cells at slot n, n = 1..N-1.
    let d0sq = d0 * d0;
    let mut layers: Vec<Vec<bool>> = Vec::with_capacity(n_slots - 1);
    let first: Vec<bool> = (0..grid.len())
        .map(|i| covered[i] && (grid.center(i) - sc.q_start).norm_sq() <= d0sq)
        .collect();
    layers.push(first);
    for _ in 2..n_slots {
        let prev = layers.last().unwrap();
        let dist2 = squared_distance_transform(&grid, prev);
        let steps2 = (d0sq / (grid.step * grid.step)).to_f64_lossy();
        let next: Vec<bool> = (0..grid.len()).map(|i| covered[i] && dist2[i] <= steps2).collect();
        layers.push(next);
    }
    let last = layers.last().unwrap();
    let mut end = None;
    for i in 0..grid.len() {
        if last[i] && (grid.center(i) - sc.q_final).norm_sq() <= d0sq {
            end = Some(i);
            break;
        }
    }
    let Some(mut cur) = end else {
        let layer_sizes: Vec<usize> = layers.iter().map(|l| l.iter().filter(|&&b| b).count()).collect();
        return cert_fail(format!("goal unreachable; reachable cells per slot {layer_sizes:?}"));
    };

    // Walk predecessors back to the start.
    let offsets = grid.offsets_within(d0);
    let mut cells = vec![cur];
    for n in (0..layers.len() - 1).rev() {
        let (ci, cj) = grid.ij(cur);
        let here = grid.center(cur);
        let prev = offsets
            .iter()
            .filter_map(|&(di, dj)| grid.index(ci + di, cj + dj))
            .filter(|&p| layers[n][p] && (grid.center(p) - here).norm_sq() <= d0sq)
            .min()
            .expect("reachable cell has a predecessor");
        cells.push(prev);
        cur = prev;
    }
    cells.reverse();
    let mut waypoints = vec![sc.q_start];
    waypoints.extend(cells.iter().map(|&c| grid.center(c)));
    waypoints.push(sc.q_final);
    let mut assoc: Vec<usize> = cells.iter().map(|&c| serving[c]).collect();
    assoc.push(best_station_at(sc.q_final, &emitters, h));
    let assoc = AssociationVector { serving: assoc };
    let min_sinr = min_sinr_along(sc, &assoc, &waypoints);
    Ok(FeasibilityCertificate {
        feasible: true,
        association: Some(assoc),
        waypoints: Some(waypoints),
        method,
        interference_bound: Some(max_interference),
        min_true_sinr: min_sinr,
        note: format!("{} grid cells of {:?} m", grid.len(), cfg.grid_step.to_f64_lossy()),
    })
}

/// Exact squared Euclidean distance transform in cell units
/// (Felzenszwalb–Huttenlocher lower envelope of parabolas).
fn squared_distance_transform<T: Real>(grid: &Grid<T>, sites: &[bool]) -> Vec<f64> {
    let inf = 1e30;
    let (nx, ny) = (grid.nx, grid.ny);
    let mut f: Vec<f64> = sites.iter().map(|&s| if s { 0.0 } else { inf }).collect();
    let mut buf = vec![0.0; nx.max(ny)];
    let mut out = vec![0.0; nx.max(ny)];
    for i in 0..nx {
        for j in 0..ny {
            buf[j] = f[j * nx + i];
        }
        dt_1d(&buf[..ny], &mut out[..ny]);
        for j in 0..ny {
            f[j * nx + i] = out[j];
        }
    }
    for j in 0..ny {
        buf[..nx].copy_from_slice(&f[j * nx..(j + 1) * nx]);
        dt_1d(&buf[..nx], &mut out[..nx]);
        f[j * nx..(j + 1) * nx].copy_from_slice(&out[..nx]);
    }
    f
}

fn dt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let big = 1e30;
    if f.iter().all(|&v| v >= big) {
        d.iter_mut().for_each(|x| *x = big);
        return;
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let first = f.iter().position(|&x| x < big).unwrap();
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in (first + 1)..n {
        if f[q] >= big {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0usize;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *dq = diff * diff + f[p];
    }
}

/// Whether the grid verdict is unchanged when the slot distance moves by
/// `cells` grid steps either way. Returns `(verdict, stable)`.
pub fn oracle_verdict_is_stable<T: Real>(
    sc: &Scenario<T>,
    grid_step: T,
    cells: T,
) -> Result<(bool, bool), FeasibilityError> {
    let d0 = sc.max_slot_distance();
    let base = grid_oracle_check(sc, grid_step)?.feasible;
    let delta = cells * grid_step;
    let mut cfg = GridOracleConfig::new(grid_step);
    cfg.slot_distance = Some((d0 - delta).max(T::zero()));
    let tight = grid_oracle_check_with(sc, &cfg)?.feasible;
    cfg.slot_distance = Some(d0 + delta);
    let loose = grid_oracle_check_with(sc, &cfg)?.feasible;
    Ok((base, tight == base && loose == base))
}

/// Largest `r ≤ r_max` such that every point within `r` of `p` (ground
/// plane) keeps station `j` at SINR ≥ `gamma`, using the bound
/// `SINR ≥ (h_j/((g_j+r)²+H²)) / (Σ_k h_k/(max(g_k−r,0)²+H²) + 1)`.
pub fn certified_radius<T: Real>(p: Vec2<T>, j: usize, emitters: &[Emitter<T>], altitude: T, gamma: T, r_max: T) -> Option<T> {
    let h2 = altitude * altitude;
    let bound = |r: T| {
        let mut interference = T::zero();
        let mut signal = T::zero();
        for (k, e) in emitters.iter().enumerate() {
            let g = (p - e.position).norm();
            if k == j {
                let d = g + r;
                signal = e.gain / (d * d + h2);
            } else {
                let d = (g - r).max(T::zero());
                interference += e.gain / (d * d + h2);
            }
        }
        signal / (interference + T::one())
    };
    if bound(T::zero()) < gamma {
        return None;
    }
    if bound(r_max) >= gamma {
        return Some(r_max);
    }
    let (mut lo, mut hi) = (T::zero(), r_max);
    for _ in 0..60 {
        let mid = T::lit(0.5) * (lo + hi);
        if bound(mid) >= gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedConfig<T> {
    /// Cell size as a fraction of the slot distance.
    pub cell_fraction: T,
    /// Relative SINR margin demanded inside certified balls.
    pub sinr_margin: T,
    pub max_cells: usize,
    /// Largest waypoint step, as fractions of the slot distance, tried in
    /// order.
    pub step_fractions: Vec<T>,
    /// Weights of the preference for cells with large certified balls,
    /// tried in order.
    pub robustness_weights: Vec<T>,
}

impl<T: Real> Default for SeedConfig<T> {
    fn default() -> Self {
        Self {
            cell_fraction: T::lit(1.0 / 16.0),
            sinr_margin: T::lit(1e-3),
            max_cells: 4_000_000,
            step_fractions: vec![T::lit(0.8), T::lit(0.9), T::lit(0.97)],
            robustness_weights: vec![T::lit(4.0), T::one(), T::lit(16.0), T::zero()],
        }
    }
}

/// Cells that carry a certified ball, with their radius and serving station.
struct SeedGrid<T> {
    grid: Grid<T>,
    radius: Vec<Option<T>>,
    serving: Vec<usize>,
    goal_serving: usize,
}

fn build_seed_grid<T: Real>(sc: &Scenario<T>, cfg: &SeedConfig<T>) -> Result<Result<SeedGrid<T>, String>, FeasibilityError> {
    let emitters = sc.emitters();
    if emitters.is_empty() {
        return Ok(Err("no ground stations".into()));
    }
    let h = sc.vehicle.altitude_h;
    let d0 = sc.max_slot_distance();
    let goal = model::best_station(sc.q_final, &emitters, h).unwrap();
    if goal.sinr < sc.gamma_min {
        return Ok(Err("goal position is not covered".into()));
    }
    let (lo, hi) = search_box(sc);
    let grid = Grid::covering(lo, hi, d0 * cfg.cell_fraction, cfg.max_cells)?;
    let gamma = sc.gamma_min * (T::one() + cfg.sinr_margin);
    let mut radius: Vec<Option<T>> = vec![None; grid.len()];
    let mut serving = vec![0usize; grid.len()];
    for idx in 0..grid.len() {
        let c = grid.center(idx);
        let Some(b) = model::best_station(c, &emitters, h) else { continue };
        if b.sinr < gamma {
            continue;
        }
        if let Some(r) = certified_radius(c, b.serving, &emitters, h, gamma, d0) {
            if r > T::zero() {
                radius[idx] = Some(r);
                serving[idx] = b.serving;
            }
        }
    }
    Ok(Ok(SeedGrid {
        grid,
        radius,
        serving,
        goal_serving: goal.serving,
    }))
}

fn seed_chain<T: Real>(
    sc: &Scenario<T>,
    sg: &SeedGrid<T>,
    frac: T,
    weight: T,
    anchor: Option<&[Vec2<T>]>,
) -> Option<FeasibilityCertificate<T>> {
    let d0 = sc.max_slot_distance();
    let cells = chain_dp(sc, &sg.grid, &sg.radius, d0 * frac, weight, T::lit(0.25) * d0, anchor)?;
    let mut waypoints = vec![sc.q_start];
    waypoints.extend(cells.iter().map(|&c| sg.grid.center(c)));
    waypoints.push(sc.q_final);
    let mut assoc: Vec<usize> = cells.iter().map(|&c| sg.serving[c]).collect();
    assoc.push(sg.goal_serving);
    let assoc = AssociationVector { serving: assoc };
    let min_sinr = min_sinr_along(sc, &assoc, &waypoints);
    Some(FeasibilityCertificate {
        feasible: true,
        association: Some(assoc),
        waypoints: Some(waypoints),
        method: FeasibilityMethod::GridOracle,
        interference_bound: None,
        min_true_sinr: min_sinr,
        note: format!(
            "certified chain with steps up to {:.2} of the slot distance",
            frac.to_f64_lossy()
        ),
    })
}

/// Grid certificate used to seed the optimizer.
///
/// Unlike the plain grid oracle it keeps only cells around which some ball
/// provably stays above `γ(1 + margin)`, and among all chains picks one
/// minimizing `Σ |W_n − W_{n−1}|²` plus a penalty on small balls, with every
/// step at most a fraction of the slot distance.
pub fn certified_seed<T: Real>(sc: &Scenario<T>, cfg: &SeedConfig<T>) -> Result<FeasibilityCertificate<T>, FeasibilityError> {
    let method = FeasibilityMethod::GridOracle;
    if !(sc.gamma_min > T::zero()) {
        return Ok(trivial_certificate(sc, method));
    }
    let sg = match build_seed_grid(sc, cfg)? {
        Ok(sg) => sg,
        Err(note) => return Ok(FeasibilityCertificate::infeasible(method, note)),
    };
    let weight = cfg.robustness_weights.first().copied().unwrap_or(T::zero());
    for &frac in &cfg.step_fractions {
        if let Some(found) = seed_chain(sc, &sg, frac, weight, None) {
            return Ok(found);
        }
    }
    Ok(FeasibilityCertificate::infeasible(
        method,
        "no certified waypoint chain within the slot distance",
    ))
}

/// Seed certificate together with a starting iterate that satisfies every
/// constraint of the original problem.
///
/// Candidate chains come from the configured robustness weights and step
/// fractions, each both anchored to the minimum-acceleration path from start
/// to goal and in the compact form of [`certified_seed`]. Each candidate is
/// turned into a kinematic fit and then repaired by [`restore_connectivity`]. Returns `(certificate, None)` when no certified
/// chain exists, and an initialization error when chains exist but none
/// could be made connected.
pub fn seed_iterate<T: Real>(
    sc: &Scenario<T>,
    seed_cfg: &SeedConfig<T>,
    init_cfg: &InitConfig<T>,
) -> Result<(FeasibilityCertificate<T>, Option<TrajectoryIterate<T>>), FeasibilityError> {
    let method = FeasibilityMethod::GridOracle;
    let free = InitConfig {
        tracking_weight: T::zero(),
        ..*init_cfg
    };
    if !(sc.gamma_min > T::zero()) {
        let cert = trivial_certificate(sc, method);
        let it = initial_trajectory(&cert, sc, &free)?;
        return Ok((cert, Some(it)));
    }
    let sg = match build_seed_grid(sc, seed_cfg)? {
        Ok(sg) => sg,
        Err(note) => return Ok((FeasibilityCertificate::infeasible(method, note), None)),
    };
    let reference: Vec<Vec2<T>> = fit_kinematics(sc, &straight_waypoints(sc), &free)
        .map_err(|e| FeasibilityError::Initialization(format!("no kinematically admissible trajectory: {e}")))?
        .q
        .iter()
        .map(|&q| q * sc.length_scale)
        .collect();
    let mut last_err = None;
    let mut tried = Vec::new();
    let candidates = seed_cfg
        .robustness_weights
        .iter()
        .flat_map(|&w| seed_cfg.step_fractions.iter().flat_map(move |&f| [(w, f, true), (w, f, false)]));
    for (weight, frac, anchored) in candidates {
        {
            let anchor = anchored.then_some(reference.as_slice());
            let Some(cert) = seed_chain(sc, &sg, frac, weight, anchor) else { continue };
            if tried.contains(&cert.waypoints) {
                continue;
            }
            tried.push(cert.waypoints.clone());
            let assoc = cert.association.clone().expect("feasible chains carry an association");
            let attempt = initial_trajectory(&cert, sc, init_cfg)
                .and_then(|it| restore_connectivity(it, &assoc.serving, sc, init_cfg));
            match attempt {
                Ok(it) => return Ok((cert, Some(it))),
                Err(e) => {
                    debug!(
                        "seed with step fraction {:.2}, weight {:.1}, anchored {anchored} failed: {e}",
                        frac.to_f64_lossy(),
                        weight.to_f64_lossy()
                    );
                    last_err = Some(e);
                }
            }
        }
    }
    match last_err {
        Some(e) => Err(e),
        None => Ok((
            FeasibilityCertificate::infeasible(method, "no certified waypoint chain within the slot distance"),
            None,
        )),
    }
}

/// Minimum-cost chain through certified cells, one per interior slot. The
/// cost is `Σ |ΔW|²`, or `Σ |W_n − anchor_n|²` when an anchor path is given,
/// plus `weight · (r_ref − min(R, r_ref))²` per cell.
fn chain_dp<T: Real>(
    sc: &Scenario<T>,
    grid: &Grid<T>,
    radius: &[Option<T>],
    reach: T,
    weight: T,
    r_ref: T,
    anchor: Option<&[Vec2<T>]>,
) -> Option<Vec<usize>> {
    let n_slots = sc.n_slots();
    if n_slots == 1 {
        return ((sc.q_final - sc.q_start).norm() <= reach).then(Vec::new);
    }
    let reach2 = reach * reach;
    let offsets = grid.offsets_within(reach);
    let cells: Vec<usize> = (0..grid.len()).filter(|&i| radius[i].is_some()).collect();
    let inf = T::infinity();
    let penalty: Vec<T> = radius
        .iter()
        .map(|r| {
            let short = r_ref - r.unwrap_or(T::zero()).min(r_ref);
            weight * short * short
        })
        .collect();
    let step_cost = |a: Vec2<T>, b: Vec2<T>| if anchor.is_some() { T::zero() } else { (a - b).norm_sq() };
    let anchor_cost = |c: usize, n: usize| anchor.map_or(T::zero(), |w| (grid.center(c) - w[n]).norm_sq());
    let mut cost = vec![inf; grid.len()];
    for &c in &cells {
        let d2 = (grid.center(c) - sc.q_start).norm_sq();
        if d2 <= reach2 {
            cost[c] = step_cost(grid.center(c), sc.q_start) + penalty[c] + anchor_cost(c, 1);
        }
    }
    let mut preds: Vec<Vec<usize>> = Vec::with_capacity(n_slots - 2);
    for n in 2..n_slots {
        let mut next = vec![inf; grid.len()];
        let mut pred = vec![usize::MAX; grid.len()];
        for &c in &cells {
            let (ci, cj) = grid.ij(c);
            let here = grid.center(c);
            for &(di, dj) in &offsets {
                if let Some(p) = grid.index(ci + di, cj + dj) {
                    if cost[p] < inf {
                        let v = cost[p] + step_cost(here, grid.center(p));
                        if v < next[c] {
                            next[c] = v;
                            pred[c] = p;
                        }
                    }
                }
            }
            if next[c] < inf {
                next[c] += penalty[c] + anchor_cost(c, n);
            }
        }
        cost = next;
        preds.push(pred);
    }
    let mut best = (inf, usize::MAX);
    for &c in &cells {
        let d2 = (sc.q_final - grid.center(c)).norm_sq();
        let total = cost[c] + step_cost(sc.q_final, grid.center(c));
        if cost[c] < inf && d2 <= reach2 && total < best.0 {
            best = (total, c);
        }
    }
    if best.1 == usize::MAX {
        return None;
    }
    let mut out = vec![best.1];
    let mut cur = best.1;
    for pred in preds.iter().rev() {
        cur = pred[cur];
        out.push(cur);
    }
    out.reverse();
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig<T> {
    /// Minimum speed, m/s.
    pub theta_min: T,
    /// Fraction of `v_max` and `a_max` the fitted trajectory may use.
    pub cap_fraction: T,
    /// Weight of `Σ |Q[n] − W_n|²` against `Σ |a[n]|²`, scaled units.
    pub tracking_weight: T,
    /// Iteration budget of the connectivity restoration.
    pub restoration_iterations: usize,
}

impl<T: Real> Default for InitConfig<T> {
    fn default() -> Self {
        Self {
            theta_min: T::lit(0.1),
            cap_fraction: T::lit(0.995),
            tracking_weight: T::lit(10.0),
            restoration_iterations: 40,
        }
    }
}

/// Kinematically consistent starting iterate (scaled units) that follows the
/// certificate's waypoints.
///
/// Positions are fitted by minimizing `Σ |a[n]|² + w Σ |Q[n] − W_n|²`
/// subject to the exact kinematic recursions, both endpoints and the speed
/// and acceleration caps. `α` is one-hot on the certificate's association.
/// The result is not guaranteed to meet the SINR threshold; see
/// [`restore_connectivity`].
pub fn initial_trajectory<T: Real>(
    cert: &FeasibilityCertificate<T>,
    sc: &Scenario<T>,
    cfg: &InitConfig<T>,
) -> Result<TrajectoryIterate<T>, FeasibilityError> {
    let (Some(assoc), Some(waypoints)) = (&cert.association, &cert.waypoints) else {
        return Err(FeasibilityError::Initialization("certificate is not feasible".into()));
    };
    let n_slots = sc.n_slots();
    if waypoints.len() != n_slots + 1 || assoc.serving.len() != n_slots {
        return Err(FeasibilityError::Initialization("certificate has the wrong number of slots".into()));
    }
    let it = fit_kinematics(sc, waypoints, cfg).map_err(|e| {
        FeasibilityError::Initialization(format!("no kinematically admissible trajectory: {e}"))
    })?;
    Ok(finish_iterate(it, assoc, sc))
}

fn finish_iterate<T: Real>(mut it: TrajectoryIterate<T>, assoc: &AssociationVector, sc: &Scenario<T>) -> TrajectoryIterate<T> {
    let scaled = sc.nondimensionalize();
    let js = sc.n_stations();
    it.alpha = assoc
        .serving
        .iter()
        .map(|&k| (0..js).map(|j| if j == k { T::one() } else { T::zero() }).collect())
        .collect();
    it.rho = vec![vec![T::zero(); js]; sc.n_slots()];
    it.with_true_rho(&scaled)
}

/// Drives a kinematically feasible iterate with a fixed association to one
/// that meets the true SINR threshold in every slot.
///
/// Each round solves the elastic subproblem (serving constraint relaxed by
/// `s_n ≥ 0`, cost `w Σ s_n` plus power) linearized at the current point,
/// with a trust region on the positions, and moves to its regularized
/// solution. Stops as soon as the true constraint holds everywhere.
pub fn restore_connectivity<T: Real>(
    mut it: TrajectoryIterate<T>,
    serving: &[usize],
    sc: &Scenario<T>,
    cfg: &InitConfig<T>,
) -> Result<TrajectoryIterate<T>, FeasibilityError> {
    let scaled = sc.nondimensionalize();
    let mut scfg = SurrogateConfig::for_scenario(&scaled);
    scfg.theta_min = cfg.theta_min / scaled.length_scale;
    scfg.trust_region = Some(T::lit(0.5) * scaled.v_max * scaled.slot);
    let fail = |msg: String| FeasibilityError::Initialization(msg);
    let mut prev = T::infinity();
    for round in 0..=cfg.restoration_iterations {
        let viol = true_sinr_violation(&it, &scaled);
        if viol <= T::zero() {
            debug!("connectivity restored after {round} rounds");
            return Ok(it);
        }
        if round >= 2 && viol > T::lit(0.9) * prev {
            return Err(fail(format!(
                "connectivity restoration stalled after {round} rounds (worst violation {:e})",
                viol.to_f64_lossy()
            )));
        }
        prev = viol;
        if round == cfg.restoration_iterations {
            return Err(fail(format!(
                "connectivity not restored after {round} rounds (worst violation {:e})",
                viol.to_f64_lossy()
            )));
        }
        let power = slack_power(&it, &scaled).map_err(&fail)?;
        let weight = T::lit(1e5) * (T::one() + power.abs());
        let r = assemble_restoration(&it, &scaled, &scfg, serving, weight).map_err(|e| fail(e.to_string()))?;
        let res = solver::solve(&r.sub.problem, &r.start, &SolverConfig::default());
        if res.status == SolverStatus::NumericalFailure {
            return Err(fail(format!("restoration solve failed: {}", res.diagnostics)));
        }
        let n_vars = r.sub.layout.n_vars();
        let next = regularize(TrajectoryIterate::from_flat(r.sub.layout, &res.x_star[..n_vars]), &scaled, scfg.theta_min);
        if !kinematics_within_caps(&next, &scaled) {
            return Err(fail(format!("restoration round {round} broke the kinematic caps")));
        }
        debug!(
            "restoration round {round}: violation {:e}, elastic total {:e}",
            viol.to_f64_lossy(),
            r.elastic(&res.x_star).iter().copied().sum::<T>().to_f64_lossy()
        );
        it = next;
    }
    unreachable!()
}

fn kinematics_within_caps<T: Real>(it: &TrajectoryIterate<T>, sc: &ScaledScenario<T>) -> bool {
    it.v[1..].iter().all(|v| v.norm() <= sc.v_max) && it.a.iter().all(|a| a.norm() <= sc.a_max)
}

/// Tracking fit in scaled units. Returns `(Q, v, a, θ)` with `α`/`ρ` left
/// empty.
fn fit_kinematics<T: Real>(sc: &Scenario<T>, waypoints: &[Vec2<T>], cfg: &InitConfig<T>) -> Result<TrajectoryIterate<T>, String> {
    let scaled = sc.nondimensionalize();
    let l = scaled.length_scale;
    let n_slots = sc.n_slots();
    let tc = scaled.slot;
    let half_tc2 = T::lit(0.5) * tc * tc;
    let qi = |n: usize, c: usize| 2 * n + c;
    let vi = |n: usize, c: usize| 2 * (n_slots + 1) + 2 * n + c;
    let ai = |n: usize, c: usize| 4 * (n_slots + 1) + 2 * n + c;
    let n_vars = 6 * n_slots + 4;
    let one = T::one();
    let two = T::lit(2.0);

    let sq = |support: Vec<usize>, center: Vec2<T>, scale: T, offset: T, label: String| {
        FnTerm::new(support, label, move |x: &[T]| {
            let d = Vec2::new(x[0], x[1]) - center;
            Ok(LocalEval {
                value: scale * d.norm_sq() - offset,
                grad: vec![two * scale * d.x, two * scale * d.y],
                hess: vec![two * scale, T::zero(), T::zero(), two * scale],
            })
        })
    };
    let mut p = ConvexProblem::new(n_vars);
    for n in 0..n_slots {
        p.add_objective(sq(vec![ai(n, 0), ai(n, 1)], Vec2::zero(), one, T::zero(), format!("accel energy[n={n}]")));
    }
    for n in 1..n_slots {
        p.add_objective(sq(
            vec![qi(n, 0), qi(n, 1)],
            waypoints[n] * l.recip(),
            cfg.tracking_weight,
            T::zero(),
            format!("tracking[n={n}]"),
        ));
    }
    for c in 0..2 {
        p.add_equality(vec![(qi(0, c), one)], scaled.q_start.to_array()[c], "start");
        p.add_equality(vec![(vi(0, c), one)], scaled.v0.to_array()[c], "start velocity");
        p.add_equality(vec![(qi(n_slots, c), one)], scaled.q_final.to_array()[c], "goal");
    }
    for n in 1..=n_slots {
        for c in 0..2 {
            p.add_equality(
                vec![(qi(n, c), one), (qi(n - 1, c), -one), (vi(n - 1, c), -tc), (ai(n - 1, c), -half_tc2)],
                T::zero(),
                "position dynamics",
            );
            p.add_equality(
                vec![(vi(n, c), one), (vi(n - 1, c), -one), (ai(n - 1, c), -tc)],
                T::zero(),
                "velocity dynamics",
            );
        }
    }
    let vcap = scaled.v_max * cfg.cap_fraction;
    let acap = scaled.a_max * cfg.cap_fraction;
    for n in 1..=n_slots {
        p.add_inequality(sq(vec![vi(n, 0), vi(n, 1)], Vec2::zero(), one, vcap * vcap, format!("speed[n={n}]")));
    }
    for n in 0..n_slots {
        p.add_inequality(sq(vec![ai(n, 0), ai(n, 1)], Vec2::zero(), one, acap * acap, format!("accel[n={n}]")));
    }

    // Start from the waypoints with finite-difference velocities.
    let mut x0 = vec![T::zero(); n_vars];
    for n in 0..=n_slots {
        let q = waypoints[n] * l.recip();
        x0[qi(n, 0)] = q.x;
        x0[qi(n, 1)] = q.y;
        if n < n_slots {
            let v = (waypoints[n + 1] - waypoints[n]) * (l.recip() / tc);
            x0[vi(n, 0)] = v.x;
            x0[vi(n, 1)] = v.y;
        }
    }
    let res = solver::solve(&p, &x0, &SolverConfig::default());
    if res.status == SolverStatus::NumericalFailure {
        return Err(format!("solver failure: {}", res.diagnostics));
    }
    if res.kkt_residuals.primal_ineq > T::lit(1e-9) || res.kkt_residuals.primal_eq > T::lit(1e-6) {
        return Err(format!(
            "fit infeasible (status {}, inequality residual {:e})",
            res.status.as_str(),
            res.kkt_residuals.primal_ineq
        ));
    }
    let x = res.x_star;
    let a: Vec<Vec2<T>> = (0..n_slots).map(|n| Vec2::new(x[ai(n, 0)], x[ai(n, 1)])).collect();
    let mut it = TrajectoryIterate {
        q: vec![],
        v: vec![],
        a,
        alpha: vec![],
        theta: vec![],
        rho: vec![],
    };
    rebuild_kinematics(&mut it, scaled.q_start, scaled.v0, scaled.q_final, tc);
    if !kinematics_within_caps(&it, &scaled) {
        return Err("caps violated after kinematic polish".into());
    }
    let theta_min = cfg.theta_min / l;
    it.theta = it.v[..n_slots].iter().map(|v| v.norm()).collect();
    if let Some(n) = it.theta.iter().position(|&t| t < theta_min) {
        return Err(format!("speed at slot {n} is below the minimum"));
    }
    Ok(it)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{map1, GroundStation};
    use crate::surrogate::{assemble, SurrogateConfig};

    fn single_station(gamma: f64, db: f64) -> Scenario<f64> {
        let mut s = map1();
        s.stations = vec![GroundStation::new(1, Vec2::new(0.0, 200.0), db)];
        s.q_start = Vec2::new(0.0, 0.0);
        s.q_final = Vec2::new(0.0, 400.0);
        s.gamma_min = gamma;
        s
    }

    #[test]
    fn single_station_midpoint_is_feasible() {
        let s = single_station(2.0, 80.0);
        let c = circle_graph_check(&s, 0.0);
        assert!(c.feasible, "{}", c.note);
        assert_eq!(c.association.as_ref().unwrap().serving, vec![0; 10]);
        let w = c.waypoints.unwrap();
        for k in 1..w.len() {
            assert!((w[k] - w[k - 1]).norm() <= s.max_slot_distance() + 1e-6);
        }
    }

    #[test]
    fn station_without_coverage_is_infeasible() {
        let s = single_station(2.0, 30.0);
        assert!(model::coverage_radius(1e3, 2.0, 0.0, 50.0).is_none());
        assert!(!circle_graph_check(&s, 0.0).feasible);
        assert!(!grid_oracle_check(&s, 10.0).unwrap().feasible);
    }

    #[test]
    fn distant_goal_is_infeasible() {
        let mut s = single_station(2.0, 50.0);
        let r = model::coverage_radius(1e5, 2.0, 0.0, 50.0).unwrap();
        s.q_final = Vec2::new(0.0, 200.0 + r + 1.0);
        assert!(!circle_graph_check(&s, 0.0).feasible);
    }

    #[test]
    fn zero_threshold_is_trivially_feasible() {
        let mut s = map1();
        s.gamma_min = 0.0;
        let c = circle_graph_check(&s, 0.0);
        assert!(c.feasible);
        let w = c.waypoints.unwrap();
        let step = (w[1] - w[0]).norm();
        for k in 1..w.len() {
            assert!(((w[k] - w[k - 1]).norm() - step).abs() < 1e-9);
        }
        assert!(grid_oracle_check(&s, 5.0).unwrap().feasible);
    }

    #[test]
    fn no_stations_is_infeasible() {
        let mut s = map1();
        s.stations.clear();
        assert!(!grid_oracle_check(&s, 10.0).unwrap().feasible);
        assert!(!circle_graph_check(&s, 0.0).feasible);
    }

    #[test]
    fn cell_budget_is_enforced() {
        let s = map1();
        let cfg = GridOracleConfig {
            grid_step: 0.5,
            max_cells: 1000,
            slot_distance: None,
        };
        assert!(matches!(grid_oracle_check_with(&s, &cfg), Err(FeasibilityError::Resource { .. })));
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let grid = Grid { origin: Vec2::new(0.0f64, 0.0), step: 1.0, nx: 13, ny: 9 };
        let sites: Vec<bool> = (0..grid.len()).map(|i| i % 17 == 3 || i == 50).collect();
        let dt = squared_distance_transform(&grid, &sites);
        for i in 0..grid.len() {
            let (a, b) = grid.ij(i);
            let brute = (0..grid.len())
                .filter(|&k| sites[k])
                .map(|k| {
                    let (c, d) = grid.ij(k);
                    ((a - c).pow(2) + (b - d).pow(2)) as f64
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(dt[i], brute);
        }
    }

    #[test]
    fn certified_radius_is_sound() {
        let s = map1();
        let e = s.emitters();
        let p = s.stations[1].position + Vec2::new(8.0, -5.0);
        let b = model::best_station(p, &e, 50.0).unwrap();
        let r = certified_radius(p, b.serving, &e, 50.0, 1.5, 100.0).unwrap();
        for k in 0..64 {
            let t = k as f64 / 64.0 * std::f64::consts::TAU;
            let q = p + Vec2::new(t.cos(), t.sin()) * r;
            assert!(model::sinr(q, b.serving, &e, 50.0).sinr >= 1.5 - 1e-9);
        }
    }

    #[test]
    fn straight_line_initialization() {
        let mut s = map1();
        s.gamma_min = 0.0;
        let (cert, it) = seed_iterate(&s, &SeedConfig::default(), &InitConfig::default()).unwrap();
        assert!(cert.feasible);
        let it = it.unwrap();
        let sc = s.nondimensionalize();
        assert!(it.dynamics_residual(sc.slot) < 1e-9);
        assert_eq!(it.q[10], sc.q_final);
        for row in &it.alpha {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
        for n in 0..10 {
            assert!(it.a[n].norm() <= sc.a_max && it.v[n + 1].norm() <= sc.v_max);
        }
        // Minimum acceleration energy: any other admissible trajectory, here
        // the start velocity held and corrected in the last two slots, costs
        // more.
        let energy = |a: &[Vec2<f64>]| a.iter().map(|a| a.norm_sq()).sum::<f64>();
        let mut other = it.clone();
        other.a = vec![Vec2::zero(); 10];
        let drift = sc.q_start + sc.v0 * (10.0 * sc.slot);
        let miss = sc.q_final - drift;
        // Two equal pushes `u` in slots 8 and 9 move the end by 2·Tc²·u.
        let u = miss * (1.0 / (2.0 * sc.slot * sc.slot));
        other.a[8] = u;
        other.a[9] = u;
        crate::surrogate::rebuild_kinematics(&mut other, sc.q_start, sc.v0, sc.q_final, sc.slot);
        assert!(energy(&it.a) < energy(&other.a));
    }

    #[test]
    fn bundled_map_seed_is_a_valid_expansion_point() {
        for s in crate::scenario::default_scenarios() {
            let (cert, it) = seed_iterate(&s, &SeedConfig::default(), &InitConfig::default()).unwrap();
            assert!(cert.feasible, "{}", cert.note);
            let it = it.unwrap();
            assert!(cert.min_true_sinr.unwrap() >= s.gamma_min);
            let sc = s.nondimensionalize();
            assemble(&it, &sc, &SurrogateConfig::for_scenario(&sc)).unwrap();
        }
    }
}
