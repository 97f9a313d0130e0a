//! Scalar abstraction shared by the numerical core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real floating point type the estimators are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Relative tolerance on the triangular factor diagonal below which a
    /// design matrix is treated as rank deficient.
    fn rank_tolerance() -> Self;

    /// Lossless for `f64`, rounding for `f32`.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 converts to every Scalar")
    }

    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("every Scalar converts to f64")
    }
}

impl Scalar for f64 {
    fn rank_tolerance() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    fn rank_tolerance() -> Self {
        1e-5
    }
}
