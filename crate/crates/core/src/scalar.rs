//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the game, belief and planning math is written against.
///
/// Implemented for `f32` and `f64`. Constants are written as `f64` literals and
/// converted through [`Scalar::lit`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Residual tolerance reachable by fixed-point solvers in this precision.
    fn solver_tolerance() -> Self {
        Self::lit(1e-6).max(Self::epsilon().sqrt())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Clamp into `[lo, hi]`; NaN maps to `lo`.
pub(crate) fn clamp<F: Scalar>(x: F, lo: F, hi: F) -> F {
    if x.is_nan() {
        lo
    } else {
        x.max(lo).min(hi)
    }
}
