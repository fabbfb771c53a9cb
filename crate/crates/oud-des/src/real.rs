use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};

/// Scalar used by the numerical kernels. Implemented for `f32` and `f64`.
pub trait Real: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits the scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
