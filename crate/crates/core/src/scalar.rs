//! Scalar abstraction shared by the probability and regression code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable for probabilities, pseudo-counts and minutes.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only for types that cannot hold finite `f64` values.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Standard normal CDF.
pub fn std_normal_cdf<T: Real>(z: T) -> T {
    let z = z.as_f64();
    if z == f64::INFINITY {
        return T::one();
    }
    if z == f64::NEG_INFINITY {
        return T::zero();
    }
    T::lit(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
}
