//! Scalar abstraction: the numeric core is generic over `f32`/`f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar for all geometric and metric computations.
pub trait Real:
    Float + FromPrimitive + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    /// Shorthand for lifting an `f64` literal into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Lossy view as `f64`, used for reporting and byte-level output.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
