//! Scalar abstraction over `f32` and `f64`.
//!
//! Training runs in `f32`; the gradient-check suites instantiate the same
//! generic encode/MLP/field/loss code in `f64` so finite differences are
//! meaningful at 1e-4 relative tolerance.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar used throughout the model code.
pub trait Real:
    num_traits::Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn real(v: f64) -> Self;
    /// Widen to `f64` (exact for both instantiations).
    fn to_f64(self) -> f64;
    /// Narrow to `f32` (checkpoint storage precision).
    fn to_f32(self) -> f32;
    fn from_f32(v: f32) -> Self;
}

impl Real for f32 {
    #[inline(always)]
    fn real(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn to_f32(self) -> f32 {
        self
    }
    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        v
    }
}

impl Real for f64 {
    #[inline(always)]
    fn real(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline(always)]
    fn to_f32(self) -> f32 {
        self as f32
    }
    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        v as f64
    }
}
