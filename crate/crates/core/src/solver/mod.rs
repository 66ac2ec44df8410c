//! Interior-point solver for smooth convex programs with linear equalities
//! and twice-differentiable convex inequalities.

mod check;
mod ipm;
mod problem;

pub use check::{check_term, derivative_check, DerivativeReport};
pub use ipm::{kkt_residuals, solve, KktResiduals, Multipliers, SolverConfig, SolverResult, SolverStatus};
pub use problem::{AffineTerm, ConvexProblem, FnTerm, LinearEquality, LocalEval, SmoothTerm};
