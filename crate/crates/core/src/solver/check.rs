use super::problem::{gather, ConvexProblem, SmoothTerm};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport<T> {
    pub max_grad_rel_error: T,
    pub max_hess_rel_error: T,
    /// Label of the term with the largest error of either kind.
    pub worst_term: String,
    pub terms_checked: usize,
    /// Labels of terms whose evaluation failed at a perturbed point.
    pub domain_failures: Vec<String>,
}

impl<T: Real> DerivativeReport<T> {
    pub fn max_rel_error(&self) -> T {
        self.max_grad_rel_error.max(self.max_hess_rel_error)
    }
}

/// Relative error of one entry, measured against the largest entry of the
/// same term so that structurally zero entries do not divide by noise.
fn rel_err<T: Real>(analytic: T, fd: T, scale: T) -> T {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(scale)
}

/// Compares a single term's analytic gradient and Hessian against central
/// differences with relative step `step`. Returns `(grad_err, hess_err)`.
pub fn check_term<T: Real>(term: &dyn SmoothTerm<T>, local: &[T], step: T) -> Result<(T, T), String> {
    let m = local.len();
    let base = term.eval(local)?;
    let two = T::lit(2.0);
    let scale_floor = T::lit(1e-3);
    let grad_scale = base.grad.iter().fold(T::zero(), |a, &g| a.max(g.abs())) * scale_floor;
    let hess_scale = base.hess.iter().fold(T::zero(), |a, &g| a.max(g.abs())) * scale_floor;
    let tiny = T::lit(1e-12);
    let mut ge = T::zero();
    let mut he = T::zero();
    for i in 0..m {
        let h = step * local[i].abs().max(T::one());
        let mut xp = local.to_vec();
        let mut xm = local.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let ep = term.eval(&xp)?;
        let em = term.eval(&xm)?;
        let g_fd = (ep.value - em.value) / (two * h);
        ge = ge.max(rel_err(base.grad[i], g_fd, grad_scale.max(tiny)));
        for j in 0..m {
            let h_fd = (ep.grad[j] - em.grad[j]) / (two * h);
            he = he.max(rel_err(base.hess[j * m + i], h_fd, hess_scale.max(tiny)));
        }
    }
    Ok((ge, he))
}

/// Finite-difference audit of every objective and inequality term of
/// `problem` at `x`.
pub fn derivative_check<T: Real>(problem: &ConvexProblem<T>, x: &[T], step: T) -> DerivativeReport<T> {
    let mut report = DerivativeReport {
        max_grad_rel_error: T::zero(),
        max_hess_rel_error: T::zero(),
        worst_term: String::new(),
        terms_checked: 0,
        domain_failures: Vec::new(),
    };
    let mut worst = T::zero();
    for term in problem.objective.iter().chain(problem.inequalities.iter()) {
        let local = gather(x, term.support());
        match check_term(term.as_ref(), &local, step) {
            Ok((ge, he)) => {
                report.terms_checked += 1;
                report.max_grad_rel_error = report.max_grad_rel_error.max(ge);
                report.max_hess_rel_error = report.max_hess_rel_error.max(he);
                if ge.max(he) > worst || report.worst_term.is_empty() {
                    worst = ge.max(he);
                    report.worst_term = term.label();
                }
            }
            Err(_) => report.domain_failures.push(term.label()),
        }
    }
    report
}
