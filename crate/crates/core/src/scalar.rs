//! Floating-point abstraction shared by the closed-form pricing code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the closed-form layers are written against.
///
/// Implemented for `f32` and `f64`. Simulation, data ingestion and
/// calibration work in `f64` only.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `(1 - e^{-a t}) / a`, the integral of `e^{-a s}` over `[0, t]`.
///
/// Uses `expm1` so small `a t` keeps full precision.
#[inline]
pub fn decay_integral<S: Scalar>(a: S, t: S) -> S {
    if a == S::zero() {
        return t;
    }
    -(-a * t).exp_m1() / a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_integral_limits() {
        assert_eq!(decay_integral(0.0_f64, 2.0), 2.0);
        let v = decay_integral(1e-12_f64, 1.0);
        assert!((v - 1.0).abs() < 1e-12);
        let v = decay_integral(2.0_f64, 0.5);
        assert!((v - (1.0 - (-1.0_f64).exp()) / 2.0).abs() < 1e-16);
    }

    #[test]
    fn lit_roundtrip_f32() {
        assert_eq!(f32::lit(0.5), 0.5_f32);
    }
}
