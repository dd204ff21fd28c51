//! Scalar abstraction shared by the physics and statistics modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the model code is generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Relative tolerance floor usable with this precision.
    #[inline]
    fn tol_floor(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        Self::lit(requested).max(floor)
    }
}

impl Real for f32 {}
impl Real for f64 {}
