//! Scalar abstraction: every numeric pipeline in this crate is generic over
//! [`Real`], instantiated as `f32` or `f64`. The crate root exports `f64`
//! aliases for the file-backed pipelines.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Probability clamp applied before every logarithm.
pub fn clamp_prob<T: Real>(p: T) -> T {
    let eps = T::of(1e-7);
    p.max(eps).min(T::one() - eps)
}

/// Logistic function, the map from logits to probabilities.
pub fn logistic<T: Real>(t: T) -> T {
    T::one() / (T::one() + (-t).exp())
}
