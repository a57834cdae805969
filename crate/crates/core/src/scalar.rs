//! Floating-point scalar abstraction shared by images, volumes and the network.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable throughout the crate.
///
/// Implemented for `f32` (training/inference default) and `f64`
/// (gradient checks, metric oracles).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts from `f64`, panicking only on values the type cannot represent at all.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion from f64")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }

    #[inline]
    fn as_f32(self) -> f32 {
        self.to_f32().expect("scalar conversion to f32")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
