//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real number type the circuit model, samplers and metrics are generic over.
///
/// Implemented automatically for every type satisfying the bounds, which in
/// practice means `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + FromStr + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for the float types.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Target residual used by root finding: tight for f64, relaxed for
    /// narrower types whose resolution cannot reach it.
    fn residual_tolerance() -> Self {
        let eps = Self::epsilon().to_f64_lossy();
        Self::lit((eps * 0.1).max(1e-12))
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + LowerExp
        + FromStr
        + Send
        + Sync
        + 'static
{
}
