//! Scalar abstraction: the numeric code is generic over the floating-point
//! type, with `f64` aliases exported at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for converting configuration values (always `f64`) into `S`.
#[inline]
pub(crate) fn cast<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("f64 is representable in every Scalar type")
}
