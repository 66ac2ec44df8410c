use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar used throughout the planner.
///
/// Everything numerical is written against this trait so the model and the
/// solver can be instantiated at `f32` for cheap exploratory runs and at
/// `f64` for the tolerances the planner is tuned for.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `T::lit`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff<T: Real>(a: T, b: T, floor: T) -> T {
    let scale = a.abs().max(b.abs()).max(floor);
    (a - b).abs() / scale
}
