//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Scalar`], which is any
//! IEEE float with the `num-traits` surface we rely on. `f64` is the default
//! used by the training harness (the graphs are small, and the tight
//! finite-difference tolerances need the extra precision); `f32` is supported
//! for the core math.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Floating-point scalar usable in tensors, decompositions and losses.
pub trait Scalar:
    Float + Sum + Debug + Display + Send + Sync + Default + serde::Serialize + 'static
{
    /// Lossy conversion from `f64`, used for constants and RNG draws.
    fn from_f64(v: f64) -> Self;

    /// Lossy conversion to `f64`, used for metrics and reporting.
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}
