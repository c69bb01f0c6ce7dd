//! Scalar abstraction shared by every tensor in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real element type of feature cubes and memory cubes: `f32` or `f64`.
///
/// Reductions (norms, dot products, channel sums) are always carried out in
/// `f64` regardless of the storage type.
pub trait Scalar:
    Float
    + FloatConst
    + FftNum
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossless for `f32`; rounds to nearest for `f64`.
    fn to_f32_bits(self) -> u32;
    fn from_f32_bits(bits: u32) -> Self;

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn to_f32_bits(self) -> u32 {
        self.to_bits()
    }

    fn from_f32_bits(bits: u32) -> Self {
        f32::from_bits(bits)
    }
}

impl Scalar for f64 {
    fn to_f32_bits(self) -> u32 {
        (self as f32).to_bits()
    }

    fn from_f32_bits(bits: u32) -> Self {
        f32::from_bits(bits) as f64
    }
}
