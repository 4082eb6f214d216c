//! Scalar abstraction so the numeric core runs in `f32` or `f64`.

use num_traits::{Float, FromPrimitive, NumCast};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::{Debug, Display};

/// Floating-point scalar used throughout the crate.
///
/// The tolerance constants are per-type: `f64` uses the tolerances the
/// rest of the crate is specified against, `f32` uses looser ones.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumCast
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance for bound membership.
    const FEAS_TOL: f64;
    /// Distance below which two vertices are considered the same point.
    const DEDUP_TOL: f64;
    /// Stopping width for gap bisection.
    const BISECT_TOL: f64;
    /// Guard band added before flooring a log ratio.
    const FLOOR_GUARD: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn feas_tol() -> Self {
        Self::lit(Self::FEAS_TOL)
    }
}

impl Scalar for f64 {
    const FEAS_TOL: f64 = 1e-9;
    const DEDUP_TOL: f64 = 1e-7;
    const BISECT_TOL: f64 = 1e-10;
    const FLOOR_GUARD: f64 = 1e-12;
}

impl Scalar for f32 {
    const FEAS_TOL: f64 = 1e-4;
    const DEDUP_TOL: f64 = 1e-3;
    const BISECT_TOL: f64 = 1e-4;
    const FLOOR_GUARD: f64 = 1e-5;
}

/// `floor(num / den)` with the scalar's guard band, as an integer.
pub(crate) fn guarded_floor_ratio<T: Scalar>(num: T, den: T) -> i64 {
    let r = num / den + T::lit(T::FLOOR_GUARD);
    r.floor().to_i64().unwrap_or(i64::MAX)
}
