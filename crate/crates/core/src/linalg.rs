//! Dense symmetric linear algebra: Bunch–Kaufman `LDLᵀ` for the indefinite
//! KKT systems of the interior-point solver, and a cyclic Jacobi eigensolver
//! for small diagnostic matrices.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is numerically singular at pivot {0}")]
    Singular(usize),
    #[error("non-finite entry encountered at pivot {0}")]
    NonFinite(usize),
}

/// Square symmetric matrix in full row-major storage. Callers keep both
/// triangles in sync; [`SymMatrix::add_sym`] does this for off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Adds `v` at `(i, j)` and, when off-diagonal, at `(j, i)`.
    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn add_diag(&mut self, range: std::ops::Range<usize>, v: T) {
        for i in range {
            self.data[i * self.n + i] += v;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(x).map(|(&a, &b)| a * b).sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy)]
enum Pivot<T> {
    One(T),
    /// 2×2 block `[[a, b], [b, c]]` occupying this row and the next.
    Two(T, T, T),
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` and block-diagonal `D`
/// made of 1×1 and 2×2 blocks.
#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    n: usize,
    /// Strictly lower part holds `L`; diagonal and upper part are unused.
    l: Vec<T>,
    pivots: Vec<Option<Pivot<T>>>,
    /// `perm[k]` is the original row sitting at position `k`.
    perm: Vec<usize>,
}

impl<T: Real> LdlFactor<T> {
    pub fn factor(a: &SymMatrix<T>) -> Result<Self, LinalgError> {
        let n = a.n;
        let mut w = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots: Vec<Option<Pivot<T>>> = vec![None; n];
        let alpha = (T::one() + T::lit(17.0).sqrt()) / T::lit(8.0);
        let tiny = a.max_abs().max(T::one()) * T::epsilon() * T::epsilon();

        // Only the lower triangle of the active block is kept current.
        let idx = |i: usize, j: usize| if i >= j { i * n + j } else { j * n + i };

        let swap = |w: &mut Vec<T>, perm: &mut Vec<usize>, k: usize, r: usize| {
            if k == r {
                return;
            }
            perm.swap(k, r);
            // Rows of L already computed.
            for j in 0..k {
                w.swap(k * n + j, r * n + j);
            }
            // Active block, lower triangle, with k < r.
            w.swap(k * n + k, r * n + r);
            for j in (k + 1)..r {
                w.swap(j * n + k, r * n + j);
            }
            for i in (r + 1)..n {
                w.swap(i * n + k, i * n + r);
            }
        };

        let mut k = 0;
        while k < n {
            let akk = w[k * n + k];
            if !akk.is_finite() {
                return Err(LinalgError::NonFinite(k));
            }
            let (mut lambda, mut r) = (T::zero(), k);
            for i in (k + 1)..n {
                let v = w[i * n + k].abs();
                if v > lambda {
                    lambda = v;
                    r = i;
                }
            }
            if lambda <= tiny && akk.abs() <= tiny {
                return Err(LinalgError::Singular(k));
            }

            let two_by_two = if akk.abs() >= alpha * lambda {
                false
            } else {
                let mut sigma = T::zero();
                for j in k..n {
                    if j != r {
                        sigma = sigma.max(w[idx(j, r)].abs());
                    }
                }
                if akk.abs() * sigma >= alpha * lambda * lambda {
                    false
                } else if w[r * n + r].abs() >= alpha * sigma {
                    swap(&mut w, &mut perm, k, r);
                    false
                } else {
                    swap(&mut w, &mut perm, k + 1, r);
                    true
                }
            };

            if !two_by_two {
                let d = w[k * n + k];
                if d.abs() <= tiny {
                    return Err(LinalgError::Singular(k));
                }
                pivots[k] = Some(Pivot::One(d));
                let inv = d.recip();
                for i in (k + 1)..n {
                    let lik = w[i * n + k] * inv;
                    if lik != T::zero() {
                        for j in (k + 1)..=i {
                            let u = lik * w[j * n + k];
                            w[i * n + j] -= u;
                        }
                    }
                }
                // Store multipliers after the update used the raw column.
                for i in (k + 1)..n {
                    w[i * n + k] *= inv;
                }
                k += 1;
            } else {
                let a11 = w[k * n + k];
                let a21 = w[(k + 1) * n + k];
                let a22 = w[(k + 1) * n + k + 1];
                if a21.abs() <= tiny {
                    return Err(LinalgError::Singular(k));
                }
                let d11 = a22 / a21;
                let d22 = a11 / a21;
                let det_scaled = d11 * d22 - T::one();
                if det_scaled.abs() <= T::epsilon() {
                    return Err(LinalgError::Singular(k));
                }
                let t = det_scaled.recip();
                let d21 = t / a21;
                pivots[k] = Some(Pivot::Two(a11, a21, a22));
                pivots[k + 1] = None;
                let m = n - (k + 2);
                let mut l1 = vec![T::zero(); m];
                let mut l2 = vec![T::zero(); m];
                for (o, i) in ((k + 2)..n).enumerate() {
                    let (x, y) = (w[i * n + k], w[i * n + k + 1]);
                    l1[o] = d21 * (d11 * x - y);
                    l2[o] = d21 * (d22 * y - x);
                }
                for (o, i) in ((k + 2)..n).enumerate() {
                    if l1[o] == T::zero() && l2[o] == T::zero() {
                        continue;
                    }
                    for j in (k + 2)..=i {
                        let u = l1[o] * w[j * n + k] + l2[o] * w[j * n + k + 1];
                        w[i * n + j] -= u;
                    }
                }
                for (o, i) in ((k + 2)..n).enumerate() {
                    w[i * n + k] = l1[o];
                    w[i * n + k + 1] = l2[o];
                }
                w[(k + 1) * n + k] = T::zero();
                k += 2;
            }
        }
        Ok(Self { n, l: w, pivots, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn inertia(&self) -> Inertia {
        let mut inertia = Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };
        for p in self.pivots.iter().flatten() {
            match *p {
                Pivot::One(d) => {
                    if d > T::zero() {
                        inertia.positive += 1
                    } else if d < T::zero() {
                        inertia.negative += 1
                    } else {
                        inertia.zero += 1
                    }
                }
                Pivot::Two(a, b, c) => {
                    let det = a * c - b * b;
                    if det < T::zero() {
                        inertia.positive += 1;
                        inertia.negative += 1;
                    } else if a + c > T::zero() {
                        inertia.positive += 2;
                    } else {
                        inertia.negative += 2;
                    }
                }
            }
        }
        inertia
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        // L y = P b
        let mut k = 0;
        while k < n {
            let step = match self.pivots[k] {
                Some(Pivot::Two(..)) => 2,
                _ => 1,
            };
            for c in k..k + step {
                let xc = x[c];
                if xc != T::zero() {
                    for i in (k + step)..n {
                        x[i] -= self.l[i * n + c] * xc;
                    }
                }
            }
            k += step;
        }
        // D z = y
        let mut k = 0;
        while k < n {
            match self.pivots[k] {
                Some(Pivot::One(d)) => {
                    x[k] /= d;
                    k += 1;
                }
                Some(Pivot::Two(a, b, c)) => {
                    let d11 = c / b;
                    let d22 = a / b;
                    let t = (d11 * d22 - T::one()).recip() / b;
                    let (y1, y2) = (x[k], x[k + 1]);
                    x[k] = t * (d11 * y1 - y2);
                    x[k + 1] = t * (d22 * y2 - y1);
                    k += 2;
                }
                None => unreachable!("second row of a 2x2 block visited as a pivot"),
            }
        }
        // Lᵀ w = z
        let mut k = n;
        while k > 0 {
            let (start, step) = if k >= 2 && matches!(self.pivots[k - 2], Some(Pivot::Two(..))) {
                (k - 2, 2)
            } else {
                (k - 1, 1)
            };
            for c in start..start + step {
                let mut s = x[c];
                for i in (start + step)..n {
                    s -= self.l[i * n + c] * x[i];
                }
                x[c] = s;
            }
            k -= step;
        }
        let mut out = vec![T::zero(); n];
        for (pos, &orig) in self.perm.iter().enumerate() {
            out[orig] = x[pos];
        }
        out
    }

    /// Solve followed by up to `steps` rounds of iterative refinement against
    /// the original matrix. Returns the solution and the final residual norm.
    pub fn solve_refined(&self, a: &SymMatrix<T>, b: &[T], steps: usize) -> (Vec<T>, T) {
        let mut x = self.solve(b);
        let mut res = residual(a, &x, b);
        let mut rn = inf_norm(&res);
        for _ in 0..steps {
            if rn == T::zero() {
                break;
            }
            let dx = self.solve(&res);
            let cand: Vec<T> = x.iter().zip(&dx).map(|(&xi, &di)| xi + di).collect();
            let cres = residual(a, &cand, b);
            let cn = inf_norm(&cres);
            if !(cn < rn) {
                break;
            }
            x = cand;
            res = cres;
            rn = cn;
        }
        (x, rn)
    }
}

fn residual<T: Real>(a: &SymMatrix<T>, x: &[T], b: &[T]) -> Vec<T> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect()
}

pub fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations, in
/// ascending order.
pub fn symmetric_eigenvalues<T: Real>(a: &SymMatrix<T>) -> Vec<T> {
    let n = a.n;
    let mut m = a.data.clone();
    let off = |m: &[T]| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s
    };
    let scale: T = m.iter().map(|&v| v * v).sum::<T>();
    let tol = scale * T::epsilon() * T::epsilon();
    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector, SymmetricEigen};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix<f64> {
        SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn to_na(a: &SymMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(a.dim(), a.dim(), |i, j| a.get(i, j))
    }

    #[test]
    fn solves_random_indefinite_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 8, 20, 60] {
            for _ in 0..20 {
                let a = random_sym(&mut rng, n);
                let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let f = LdlFactor::factor(&a).unwrap();
                let (x, _) = f.solve_refined(&a, &b, 2);
                let expected = to_na(&a).lu().solve(&DVector::from_vec(b.clone())).unwrap();
                let cond = to_na(&a).svd(false, false).singular_values;
                let kappa = cond.max() / cond.min();
                for i in 0..n {
                    assert!((x[i] - expected[i]).abs() <= 1e-12 * kappa * expected.amax().max(1.0), "n={n}");
                }
            }
        }
    }

    #[test]
    fn handles_zero_diagonal_kkt() {
        // [[2, 1], [1, 0]] needs a pivot that is not the diagonal.
        let a = SymMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => 2.0f64,
            (1, 0) => 1.0,
            _ => 0.0,
        });
        let f = LdlFactor::factor(&a).unwrap();
        let x = f.solve(&[3.0f64, 1.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let z = SymMatrix::from_fn(2, |i, j| if i == 1 && j == 0 { 1.0f64 } else { 0.0 });
        let f = LdlFactor::factor(&z).unwrap();
        let x = f.solve(&[2.0f64, 3.0]);
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        assert_eq!(f.inertia(), Inertia { positive: 1, negative: 1, zero: 0 });
    }

    #[test]
    fn inertia_matches_eigenvalue_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [1, 4, 9, 16] {
            for _ in 0..30 {
                let a = random_sym(&mut rng, n);
                let eig = SymmetricEigen::new(to_na(&a)).eigenvalues;
                if eig.iter().any(|e| e.abs() < 1e-8) {
                    continue;
                }
                let f = LdlFactor::factor(&a).unwrap();
                let i = f.inertia();
                assert_eq!(i.positive, eig.iter().filter(|&&e| e > 0.0).count());
                assert_eq!(i.negative, eig.iter().filter(|&&e| e < 0.0).count());
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SymMatrix::<f64>::zeros(3);
        assert!(matches!(LdlFactor::factor(&a), Err(LinalgError::Singular(0))));
        let ones = SymMatrix::from_fn(3, |_, _| 1.0);
        assert!(LdlFactor::factor(&ones).is_err());
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..9 {
            for _ in 0..20 {
                let a = random_sym(&mut rng, n);
                let ours = symmetric_eigenvalues(&a);
                let mut theirs: Vec<f64> = SymmetricEigen::new(to_na(&a)).eigenvalues.iter().copied().collect();
                theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                for (x, y) in ours.iter().zip(&theirs) {
                    assert!((x - y).abs() < 1e-12, "{ours:?} vs {theirs:?}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn kkt_shaped_systems_solve(seed in 0u64..10_000, n in 1usize..12, m in 0usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = m.min(n);
            let size = n + m;
            let mut a = SymMatrix::zeros(size);
            // Positive definite block plus full-rank constraint rows.
            for i in 0..n {
                a.add_sym(i, i, 1.0 + rng.gen_range(0.0..10.0));
                for j in 0..i {
                    a.add_sym(i, j, rng.gen_range(-0.1..0.1));
                }
            }
            for r in 0..m {
                for j in 0..n {
                    let v = if j == r { 1.0 } else { rng.gen_range(-0.3..0.3) };
                    a.add_sym(n + r, j, v);
                }
            }
            let b: Vec<f64> = (0..size).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = LdlFactor::factor(&a).unwrap();
            let (x, res) = f.solve_refined(&a, &b, 3);
            prop_assert!(res < 1e-12);
            prop_assert_eq!(f.inertia(), Inertia { positive: n, negative: m, zero: 0 });
            prop_assert!(x.iter().all(|v| v.is_finite()));
        }
    }
}
