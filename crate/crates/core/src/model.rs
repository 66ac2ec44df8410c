//! Line-of-sight channel, SINR and fixed-wing propulsion power, with the
//! analytic derivatives the optimizer needs.
//!
//! Noise power is folded into the per-station reference SNR `h`, so the
//! SINR denominator is `interference + 1`.

use thiserror::Error;

use crate::geometry::Vec2;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// A transmitting ground station as seen by the channel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter<T> {
    pub position: Vec2<T>,
    /// Linear reference SNR `h = P β0 / σ²`.
    pub gain: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams<T> {
    pub c1: T,
    pub c2: T,
    pub g: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState<T> {
    pub q: Vec2<T>,
    pub v: Vec2<T>,
    pub a: Vec2<T>,
}

impl<T: Real> KinematicState<T> {
    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.v.is_finite() && self.a.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrBreakdown<T> {
    /// Zero-based index of the serving station.
    pub serving: usize,
    pub signal: T,
    pub interference: T,
    pub sinr: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerms<T> {
    pub kinetic_term: T,
    pub parasitic_term: T,
    pub total: T,
}

/// `|(q, H) - (q_j, 0)|²`.
pub fn squared_distance<T: Real>(q: Vec2<T>, station: Vec2<T>, altitude: T) -> T {
    (q - station).norm_sq() + altitude * altitude
}

/// Total received power from every station except `serving`, noise-normalized.
pub fn interference<T: Real>(q: Vec2<T>, serving: usize, emitters: &[Emitter<T>], altitude: T) -> T {
    emitters
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != serving)
        .map(|(_, e)| e.gain / squared_distance(q, e.position, altitude))
        .sum()
}

/// SINR at ground position `q` when served by station `serving` (zero-based).
pub fn sinr<T: Real>(q: Vec2<T>, serving: usize, emitters: &[Emitter<T>], altitude: T) -> SinrBreakdown<T> {
    assert!(serving < emitters.len(), "serving station index out of range");
    let e = &emitters[serving];
    let signal = e.gain / squared_distance(q, e.position, altitude);
    let interference = interference(q, serving, emitters, altitude);
    SinrBreakdown {
        serving,
        signal,
        interference,
        sinr: signal / (interference + T::one()),
    }
}

/// Station with the highest SINR at `q`; ties go to the lowest index.
pub fn best_station<T: Real>(q: Vec2<T>, emitters: &[Emitter<T>], altitude: T) -> Option<SinrBreakdown<T>> {
    let mut best: Option<SinrBreakdown<T>> = None;
    for j in 0..emitters.len() {
        let s = sinr(q, j, emitters, altitude);
        if best.is_none_or(|b| s.sinr > b.sinr) {
            best = Some(s);
        }
    }
    best
}

/// Ground-plane radius around a station inside which its SINR reaches
/// `gamma_min` given an assumed interference level. `None` when the station
/// cannot reach the threshold even directly overhead.
pub fn coverage_radius<T: Real>(gain: T, gamma_min: T, interference_bound: T, altitude: T) -> Option<T> {
    assert!(gamma_min > T::zero(), "coverage radius needs a positive threshold");
    let radicand = gain / (gamma_min * (interference_bound + T::one())) - altitude * altitude;
    if radicand > T::zero() {
        Some(radicand.sqrt())
    } else {
        None
    }
}

/// Per-slot power with the speed in the parasitic term replaced by the
/// slack `theta`: `c1|v|³ + (c2/θ)(1 + |a|²/g)`.
pub fn power_slack<T: Real>(v: Vec2<T>, a: Vec2<T>, theta: T, p: &PowerParams<T>) -> Result<PowerTerms<T>, ModelError> {
    if !(theta > T::zero()) {
        return Err(ModelError::Domain(format!("theta must be positive, got {theta}")));
    }
    let speed = v.norm();
    let kinetic_term = p.c1 * speed * speed * speed;
    let parasitic_term = p.c2 / theta * (T::one() + a.norm_sq() / p.g);
    Ok(PowerTerms {
        kinetic_term,
        parasitic_term,
        total: kinetic_term + parasitic_term,
    })
}

/// Propulsion power of one slot, `c1|v|³ + (c2/|v|)(1 + |a|²/g)`.
pub fn propulsion_power<T: Real>(v: Vec2<T>, a: Vec2<T>, p: &PowerParams<T>) -> Result<T, ModelError> {
    power_slack(v, a, v.norm(), p).map(|t| t.total)
}

/// Value, gradient and Hessian of the slack power over `(vx, vy, ax, ay, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDerivatives<T> {
    pub value: T,
    pub grad: [T; 5],
    pub hess: [[T; 5]; 5],
}

/// Derivatives of [`power_slack`] with `|v|³` smoothed to `(|v|² + ε²)^{3/2}`
/// so the Hessian exists at `v = 0`.
pub fn power_gradient_hessian<T: Real>(
    v: Vec2<T>,
    a: Vec2<T>,
    theta: T,
    p: &PowerParams<T>,
    eps_v: T,
) -> Result<PowerDerivatives<T>, ModelError> {
    if !(theta > T::zero()) {
        return Err(ModelError::Domain(format!("theta must be positive, got {theta}")));
    }
    let zero = T::zero();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let s = v.norm_sq() + eps_v * eps_v;
    let root = s.sqrt();
    let kinetic = p.c1 * s * root;
    let bracket = T::one() + a.norm_sq() / p.g;
    let parasitic = p.c2 / theta * bracket;

    let mut grad = [zero; 5];
    let kv = three * p.c1 * root;
    grad[0] = kv * v.x;
    grad[1] = kv * v.y;
    let pa = two * p.c2 / (theta * p.g);
    grad[2] = pa * a.x;
    grad[3] = pa * a.y;
    grad[4] = -p.c2 / (theta * theta) * bracket;

    let mut hess = [[zero; 5]; 5];
    let vv = three * p.c1 / root;
    let vs = [v.x, v.y];
    for i in 0..2 {
        for j in 0..2 {
            hess[i][j] = vv * vs[i] * vs[j];
        }
        hess[i][i] += kv;
    }
    hess[2][2] = pa;
    hess[3][3] = pa;
    let at = -two * p.c2 / (theta * theta * p.g);
    hess[2][4] = at * a.x;
    hess[4][2] = hess[2][4];
    hess[3][4] = at * a.y;
    hess[4][3] = hess[3][4];
    hess[4][4] = two * p.c2 / (theta * theta * theta) * bracket;

    Ok(PowerDerivatives {
        value: kinetic + parasitic,
        grad,
        hess,
    })
}

fn interference_sum<T: Real>(rho: &[T], j: usize, gains: &[T]) -> Result<T, ModelError> {
    assert_eq!(rho.len(), gains.len());
    assert!(j < rho.len());
    let mut sum = T::zero();
    for (k, (&r, &h)) in rho.iter().zip(gains).enumerate() {
        if k == j {
            continue;
        }
        if !(r > T::zero()) {
            return Err(ModelError::Domain(format!(
                "interferer rho[{k}] must be positive, got {r}"
            )));
        }
        sum += h / r;
    }
    Ok(sum)
}

/// `f_j(ρ) = (Σ_{k≠j} h_k/ρ_k + 1)^{-1}`, the SINR denominator inverted.
pub fn f_j<T: Real>(rho: &[T], j: usize, gains: &[T]) -> Result<T, ModelError> {
    Ok((interference_sum(rho, j, gains)? + T::one()).recip())
}

/// Derivatives of `f_j` over the interferer coordinates `{ρ_k}_{k≠j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FjDerivatives<T> {
    /// Station indices `k ≠ j`, in increasing order.
    pub indices: Vec<usize>,
    pub value: T,
    pub grad: Vec<T>,
    /// Row-major `(J-1) × (J-1)`.
    pub hess: Vec<T>,
}

/// Gradient `f² h_k/ρ_k²` and Hessian `2S⁻³(w wᵀ − S·diag(h_k/ρ_k³))` with
/// `S = Σ h_k/ρ_k + 1` and `w_k = h_k/ρ_k²`. The Hessian is negative
/// semidefinite: `(wᵀy)² ≤ (S − 1)·Σ y_k² h_k/ρ_k³` by Cauchy–Schwarz.
pub fn f_j_gradient_hessian<T: Real>(rho: &[T], j: usize, gains: &[T]) -> Result<FjDerivatives<T>, ModelError> {
    let s = interference_sum(rho, j, gains)? + T::one();
    let indices: Vec<usize> = (0..rho.len()).filter(|&k| k != j).collect();
    let m = indices.len();
    let f = s.recip();
    let w: Vec<T> = indices.iter().map(|&k| gains[k] / (rho[k] * rho[k])).collect();
    let grad: Vec<T> = w.iter().map(|&wk| f * f * wk).collect();
    let scale = T::lit(2.0) * f * f * f;
    let mut hess = vec![T::zero(); m * m];
    for a in 0..m {
        for b in 0..m {
            hess[a * m + b] = scale * w[a] * w[b];
        }
        let k = indices[a];
        hess[a * m + a] -= scale * s * gains[k] / (rho[k] * rho[k] * rho[k]);
    }
    Ok(FjDerivatives {
        indices,
        value: f,
        grad,
        hess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    const P: PowerParams<f64> = PowerParams {
        c1: 0.002,
        c2: 80.0,
        g: 10.0,
    };

    #[test]
    fn squared_distance_examples() {
        assert_eq!(squared_distance(v(0.0, 0.0), v(0.0, 0.0), 50.0), 2500.0);
        assert_eq!(squared_distance(v(0.0, 0.0), v(1000.0, 0.0), 50.0), 1_002_500.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let q = v(rng.gen_range(-1e4..1e4), rng.gen_range(-1e4..1e4));
            assert!(squared_distance(q, v(3.0, -7.0), 50.0) >= 2500.0);
        }
    }

    #[test]
    fn sinr_examples() {
        let one = [Emitter { position: v(0.0, 0.0), gain: 1e8 }];
        let s = sinr(v(0.0, 0.0), 0, &one, 50.0);
        assert!(close(s.sinr, 40000.0, 1e-12));
        assert_eq!(s.interference, 0.0);

        let two = [
            Emitter { position: v(0.0, 0.0), gain: 1e8 },
            Emitter { position: v(1000.0, 0.0), gain: 1e8 },
        ];
        let s = sinr(v(0.0, 0.0), 0, &two, 50.0);
        // 40000 / (1e8 / 1_002_500 + 1)
        let expected = 40000.0 / (1e8 / 1_002_500.0 + 1.0);
        assert!(close(s.sinr, expected, 1e-12));
        assert!((s.sinr - 397.0).abs() < 0.05);

        let mid = sinr(v(500.0, 0.0), 0, &two, 50.0);
        let sig = 1e8 / squared_distance(v(500.0, 0.0), v(0.0, 0.0), 50.0);
        assert!(close(mid.sinr, sig / (sig + 1.0), 1e-12));
        assert!(mid.sinr < 1.0);
    }

    #[test]
    fn sinr_monotone_in_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let e: Vec<Emitter<f64>> = (0..3)
                .map(|_| Emitter {
                    position: v(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)),
                    gain: 10f64.powf(rng.gen_range(5.0..9.0)),
                })
                .collect();
            let q = v(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0));
            let base = sinr(q, 0, &e, 50.0).sinr;
            // Moving the serving station away lowers SINR.
            let mut far = e.clone();
            far[0].position = q + (e[0].position - q) * 1.5 + v(1.0, 0.0) * if e[0].position == q { 1.0 } else { 0.0 };
            if (far[0].position - q).norm() > (e[0].position - q).norm() {
                assert!(sinr(q, 0, &far, 50.0).sinr < base);
            }
            // Moving an interferer away raises SINR.
            let mut far = e.clone();
            far[1].position = q + (e[1].position - q) * 1.5;
            if (far[1].position - q).norm() > (e[1].position - q).norm() {
                assert!(sinr(q, 0, &far, 50.0).sinr > base);
            }
        }
    }

    #[test]
    fn coverage_radius_examples() {
        let r = coverage_radius(1e8, 2.0, 0.0, 50.0).unwrap();
        assert!(close(r, (5e7f64 - 2500.0).sqrt(), 1e-14));
        assert!((r - 7070.9).abs() < 0.1);
        assert!(coverage_radius(1e8, 1e5, 0.0, 50.0).is_none());
        let r1 = coverage_radius(1e8, 2.0, 1.0, 50.0).unwrap();
        assert!(close(r1, (2.5e7f64 - 2500.0).sqrt(), 1e-14));
        assert!(r1 < r);
    }

    #[test]
    fn power_examples() {
        let t = power_slack(v(10.0, 0.0), v(0.0, 0.0), 10.0, &P).unwrap();
        assert!(close(t.total, 10.0, 1e-14));
        let t = power_slack(v(10.0, 0.0), v(0.0, 5.0), 10.0, &P).unwrap();
        assert!(close(t.total, 30.0, 1e-14));
        let t = power_slack(v(0.6, 0.8), v(0.0, 0.0), 1.0, &P).unwrap();
        assert!(close(t.total, P.c1 + P.c2, 1e-14));
        assert!(power_slack(v(1.0, 0.0), v(0.0, 0.0), 0.0, &P).is_err());
        assert!(power_slack(v(1.0, 0.0), v(0.0, 0.0), -1.0, &P).is_err());
    }

    #[test]
    fn theta_tight_power_matches_propulsion_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let vv = v(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0));
            let aa = v(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let speed = vv.norm();
            let direct = P.c1 * speed.powi(3) + P.c2 / speed * (1.0 + aa.norm_sq() / P.g);
            assert!(close(propulsion_power(vv, aa, &P).unwrap(), direct, 1e-13));
        }
    }

    #[test]
    fn power_gradient_examples() {
        let d = power_gradient_hessian(v(10.0, 0.0), v(0.0, 0.0), 10.0, &P, 1e-6).unwrap();
        assert!(close(d.grad[4], -0.8, 1e-12));
        let d0 = power_gradient_hessian(v(0.0, 0.0), v(0.0, 0.0), 1.0, &P, 1e-6).unwrap();
        assert!(d0.grad[0].abs() < 1e-15 && d0.grad[1].abs() < 1e-15);
        assert!(d0.hess.iter().flatten().all(|x| x.is_finite()));
    }

    fn fd_power(x: [f64; 5], eps: f64) -> f64 {
        power_gradient_hessian(v(x[0], x[1]), v(x[2], x[3]), x[4], &P, eps).unwrap().value
    }

    #[test]
    fn power_derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = [
                rng.gen_range(-15.0..15.0),
                rng.gen_range(-15.0..15.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(0.5..15.0),
            ];
            let d = power_gradient_hessian(v(x[0], x[1]), v(x[2], x[3]), x[4], &P, 1e-6).unwrap();
            for i in 0..5 {
                let h = 1e-5 * x[i].abs().max(1.0);
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let g = (fd_power(xp, 1e-6) - fd_power(xm, 1e-6)) / (2.0 * h);
                assert!(close(d.grad[i], g, 1e-5) || (d.grad[i] - g).abs() < 1e-7, "grad {i}");
                let dp = power_gradient_hessian(v(xp[0], xp[1]), v(xp[2], xp[3]), xp[4], &P, 1e-6).unwrap();
                let dm = power_gradient_hessian(v(xm[0], xm[1]), v(xm[2], xm[3]), xm[4], &P, 1e-6).unwrap();
                for j in 0..5 {
                    let hij = (dp.grad[j] - dm.grad[j]) / (2.0 * h);
                    assert!(close(d.hess[j][i], hij, 1e-5) || (d.hess[j][i] - hij).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn f_j_examples() {
        assert_eq!(f_j(&[3.0], 0, &[5.0]).unwrap(), 1.0);
        assert!(close(f_j(&[1.0, 2.0], 0, &[9.0, 2.0]).unwrap(), 0.5, 1e-15));
        assert!(close(f_j(&[1.0, 2.0, 1.0], 0, &[9.0, 2.0, 3.0]).unwrap(), 0.2, 1e-15));
        assert!(f_j(&[1.0, 0.0], 0, &[1.0, 1.0]).is_err());
        // Serving coordinate is not an interferer, so it may be anything.
        assert!(f_j(&[0.0, 1.0], 0, &[1.0, 1.0]).is_ok());
    }

    #[test]
    fn f_j_two_station_hessian_closed_form() {
        let (h2, r2) = (3.0f64, 0.7f64);
        let d = f_j_gradient_hessian(&[1.0, r2], 0, &[1.0, h2]).unwrap();
        let u = h2 / r2;
        let expected = -2.0 * h2 / r2.powi(3) * (u + 1.0).powi(-2) * (1.0 - u / (u + 1.0));
        assert!(close(d.hess[0], expected, 1e-13));
        assert!(d.hess[0] < 0.0);
    }

    #[test]
    fn f_j_range_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let jn = rng.gen_range(1..=6);
            let rho: Vec<f64> = (0..jn).map(|_| rng.gen_range(0.1..50.0)).collect();
            let h: Vec<f64> = (0..jn).map(|_| rng.gen_range(0.1..1e4)).collect();
            let j = rng.gen_range(0..jn);
            let f = f_j(&rho, j, &h).unwrap();
            assert!(f > 0.0 && f <= 1.0);
            for k in 0..jn {
                let mut bumped = rho.clone();
                bumped[k] *= 1.1;
                assert!(f_j(&bumped, j, &h).unwrap() >= f);
            }
        }
    }

    #[test]
    fn works_at_single_precision() {
        let e = [Emitter { position: Vec2::new(0.0f32, 0.0), gain: 1e8 }];
        let s = sinr(Vec2::new(0.0f32, 0.0), 0, &e, 50.0);
        assert!((s.sinr - 40000.0).abs() < 1.0);
        let t = power_slack(Vec2::new(10.0f32, 0.0), Vec2::zero(), 10.0, &PowerParams { c1: 0.002, c2: 80.0, g: 10.0 }).unwrap();
        assert!((t.total - 10.0).abs() < 1e-4);
    }
}
