//! Floating-point scalar abstraction.
//!
//! All numeric code in this crate is generic over [`Scalar`]; the crate root
//! exports `f64`-typed aliases for the common case. File formats always store
//! 64-bit floats regardless of the in-memory scalar.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the library is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub fn fl<F: Scalar>(v: f64) -> F {
    F::from_f64(v).expect("f64 constant representable in scalar type")
}

/// Convert the working scalar into `f64` (used at I/O boundaries).
#[inline]
pub fn to_f64<F: Scalar>(v: F) -> f64 {
    v.to_f64().expect("scalar convertible to f64")
}
