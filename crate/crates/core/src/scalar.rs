//! Scalar abstraction for durations and rates.
//!
//! All timing math is written against [`Scalar`] so the planner and the
//! simulator can run in `f64` (the default used by the CLI) or in `f32`
//! for compact batch evaluation.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type usable as a millisecond duration.
pub trait Scalar:
    Float
    + FromPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance used for every duration comparison.
    fn tolerance() -> Self;

    /// Converts a literal; all literals used in this crate are representable.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn approx_eq(self, other: Self) -> bool {
        (self - other).abs() <= Self::tolerance()
    }

    /// `self < other` by more than the tolerance.
    fn definitely_lt(self, other: Self) -> bool {
        self < other - Self::tolerance()
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    // f32 carries ~7 significant digits; multi-second makespans need a
    // coarser absolute tolerance.
    fn tolerance() -> Self {
        1e-3
    }
}
