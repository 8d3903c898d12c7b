//! Scalar abstraction shared by every numerical module.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar the solvers and the simulator are generic over.
///
/// Implemented for `f32` and `f64`. Model coefficients are stored as `f64`
/// in the specification types and converted once at assembly time.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal or coefficient into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable in every Real scalar")
    }

    /// Widens to `f64` for statistics and reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("Real scalars widen to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
