//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// Floating point type the simulator can run on: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FftNum + NumAssign + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts a literal. Panics only for values the target type cannot represent at all.
    fn lit(x: f64) -> Self {
        Self::from(x).expect("literal not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FftNum + NumAssign + Default + Debug + Display + Send + Sync + 'static
{
}

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}
