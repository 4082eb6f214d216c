//! Gaussian capacity helpers, in bits.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `½·log₂(1+x)`.
pub fn cap<T: Scalar>(x: T) -> Result<T> {
    if x < T::zero() || x.is_nan() {
        return Err(Error::domain(format!("cap of negative value {x}")));
    }
    Ok(cap_unchecked(x))
}

/// `max(0, ½·log₂ x)`, i.e. `max(0, C(x-1))`.
pub fn cap_hat<T: Scalar>(x: T) -> Result<T> {
    if x < T::zero() || x.is_nan() {
        return Err(Error::domain(format!("cap_hat of negative value {x}")));
    }
    Ok(cap_hat_unchecked(x))
}

#[inline]
pub(crate) fn cap_unchecked<T: Scalar>(x: T) -> T {
    T::lit(0.5) * x.ln_1p() / T::lit(std::f64::consts::LN_2)
}

#[inline]
pub(crate) fn cap_hat_unchecked<T: Scalar>(x: T) -> T {
    if x <= T::one() {
        T::zero()
    } else {
        T::lit(0.5) * x.log2()
    }
}
