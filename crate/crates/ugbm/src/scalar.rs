//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in the engine (feature values, gradients, split
//! scores, leaf weights) is generic over [`Scalar`]. The crate-root type
//! aliases pin `f64`, which is the precision all accumulation guarantees
//! and the model file format are stated for; `f32` is available for
//! memory-constrained experimentation.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar the engine is generic over.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert from `f64`, rounding if the target type is narrower.
    #[inline]
    fn cast(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("finite f64 representable as scalar")
    }

    /// Widen to `f64` for reporting and comparisons.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// Convert a count into the scalar domain.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::cast(n as f64)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}
