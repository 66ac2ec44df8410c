//! Minimum-power trajectory planning for a cellular-connected fixed-wing
//! aerial vehicle that must regain SINR connectivity once per time slot.
//!
//! The numerical core is generic over [`Real`]; the aliases at the bottom
//! of this file pin it to `f64`, which is what the CLI uses.

// NaN must fail range checks, and index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod feasibility;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod probes;
pub mod scalar;
pub mod sca;
pub mod scenario;
pub mod solver;
pub mod surrogate;

pub use geometry::Vec2;
pub use scalar::Real;

pub type Point = geometry::Vec2<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type ScaledScenario = scenario::ScaledScenario<f64>;
pub type GroundStation = scenario::GroundStation<f64>;
pub type TrajectoryIterate = surrogate::TrajectoryIterate<f64>;
pub type FeasibilityCertificate = feasibility::FeasibilityCertificate<f64>;
pub type ScaConfig = sca::ScaConfig<f64>;
pub type ScaOutcome = sca::ScaOutcome<f64>;
pub type ScaError = sca::ScaError<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
