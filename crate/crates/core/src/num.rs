//! Scalar abstraction: everything numeric in this crate is generic over
//! [`Real`], implemented for `f32` and `f64`.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar for all numeric routines.
pub trait Real:
    Float
    + FromPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable in scalar type")
}
