use std::fmt;

use crate::scalar::Real;

/// Value, gradient and row-major Hessian of a term over its own support.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEval<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess: Vec<T>,
}

impl<T: Real> LocalEval<T> {
    pub fn zeros(m: usize) -> Self {
        Self {
            value: T::zero(),
            grad: vec![T::zero(); m],
            hess: vec![T::zero(); m * m],
        }
    }
}

/// A twice-differentiable function of a few problem variables.
///
/// Objective terms are summed; inequality terms are constrained `≤ 0`.
/// `eval` returns `Err` with a short reason when the point lies outside the
/// function's domain, which the solver treats as a rejected step.
pub trait SmoothTerm<T: Real>: Send + Sync {
    fn support(&self) -> &[usize];
    fn eval(&self, local: &[T]) -> Result<LocalEval<T>, String>;
    fn label(&self) -> String;
}

/// `coeffsᵀ x + constant`.
#[derive(Debug, Clone)]
pub struct AffineTerm<T> {
    pub support: Vec<usize>,
    pub coeffs: Vec<T>,
    pub constant: T,
    pub label: String,
}

impl<T: Real> SmoothTerm<T> for AffineTerm<T> {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, local: &[T]) -> Result<LocalEval<T>, String> {
        let m = self.support.len();
        let value = self.constant + local.iter().zip(&self.coeffs).map(|(&x, &c)| x * c).sum::<T>();
        Ok(LocalEval {
            value,
            grad: self.coeffs.clone(),
            hess: vec![T::zero(); m * m],
        })
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

type EvalFn<T> = dyn Fn(&[T]) -> Result<LocalEval<T>, String> + Send + Sync;

/// A term backed by a closure; handy for tests and ad-hoc problems.
pub struct FnTerm<T> {
    support: Vec<usize>,
    f: Box<EvalFn<T>>,
    label: String,
}

impl<T: Real> FnTerm<T> {
    pub fn new(
        support: Vec<usize>,
        label: impl Into<String>,
        f: impl Fn(&[T]) -> Result<LocalEval<T>, String> + Send + Sync + 'static,
    ) -> Self {
        Self {
            support,
            f: Box::new(f),
            label: label.into(),
        }
    }
}

impl<T: Real> SmoothTerm<T> for FnTerm<T> {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, local: &[T]) -> Result<LocalEval<T>, String> {
        (self.f)(local)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

impl<T> fmt::Debug for FnTerm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnTerm")
            .field("support", &self.support)
            .field("label", &self.label)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquality<T> {
    pub coeffs: Vec<(usize, T)>,
    pub rhs: T,
    pub label: String,
}

impl<T: Real> LinearEquality<T> {
    pub fn residual(&self, x: &[T]) -> T {
        self.coeffs.iter().map(|&(i, c)| c * x[i]).sum::<T>() - self.rhs
    }
}

/// Smooth convex program
///
/// ```text
/// minimize    constant + cᵀx + Σ objective_k(x)
/// subject to  A x = b,   inequality_i(x) ≤ 0
/// ```
pub struct ConvexProblem<T: Real> {
    pub n_vars: usize,
    pub objective: Vec<Box<dyn SmoothTerm<T>>>,
    /// Dense linear objective `c`, length `n_vars`.
    pub linear_cost: Vec<T>,
    pub constant: T,
    pub equalities: Vec<LinearEquality<T>>,
    pub inequalities: Vec<Box<dyn SmoothTerm<T>>>,
}

pub(crate) fn gather<T: Real>(x: &[T], support: &[usize]) -> Vec<T> {
    support.iter().map(|&i| x[i]).collect()
}

impl<T: Real> ConvexProblem<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: Vec::new(),
            linear_cost: vec![T::zero(); n_vars],
            constant: T::zero(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    pub fn add_objective(&mut self, term: impl SmoothTerm<T> + 'static) {
        self.check_support(term.support());
        self.objective.push(Box::new(term));
    }

    pub fn add_inequality(&mut self, term: impl SmoothTerm<T> + 'static) {
        self.check_support(term.support());
        self.inequalities.push(Box::new(term));
    }

    pub fn add_equality(&mut self, coeffs: Vec<(usize, T)>, rhs: T, label: impl Into<String>) {
        for &(i, _) in &coeffs {
            assert!(i < self.n_vars, "equality references variable {i} out of range");
        }
        self.equalities.push(LinearEquality {
            coeffs,
            rhs,
            label: label.into(),
        });
    }

    /// `x_i ≥ lower`.
    pub fn add_lower_bound(&mut self, i: usize, lower: T, label: impl Into<String>) {
        self.add_inequality(AffineTerm {
            support: vec![i],
            coeffs: vec![-T::one()],
            constant: lower,
            label: label.into(),
        });
    }

    /// `x_i ≤ upper`.
    pub fn add_upper_bound(&mut self, i: usize, upper: T, label: impl Into<String>) {
        self.add_inequality(AffineTerm {
            support: vec![i],
            coeffs: vec![T::one()],
            constant: -upper,
            label: label.into(),
        });
    }

    fn check_support(&self, support: &[usize]) {
        for &i in support {
            assert!(i < self.n_vars, "term references variable {i} out of range");
        }
    }

    pub fn objective_value(&self, x: &[T]) -> Result<T, String> {
        let mut f = self.constant + x.iter().zip(&self.linear_cost).map(|(&a, &b)| a * b).sum::<T>();
        for t in &self.objective {
            f += t
                .eval(&gather(x, t.support()))
                .map_err(|e| format!("{}: {e}", t.label()))?
                .value;
        }
        Ok(f)
    }

    pub fn inequality_values(&self, x: &[T]) -> Result<Vec<T>, String> {
        self.inequalities
            .iter()
            .map(|t| {
                t.eval(&gather(x, t.support()))
                    .map(|e| e.value)
                    .map_err(|e| format!("{}: {e}", t.label()))
            })
            .collect()
    }

    pub fn equality_residuals(&self, x: &[T]) -> Vec<T> {
        self.equalities.iter().map(|e| e.residual(x)).collect()
    }
}

impl<T: Real> fmt::Debug for ConvexProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexProblem")
            .field("n_vars", &self.n_vars)
            .field("objective_terms", &self.objective.len())
            .field("equalities", &self.equalities.len())
            .field("inequalities", &self.inequalities.len())
            .finish()
    }
}
