//! Scalar abstraction shared by every numerical routine.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Floating point type the library is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal out of range")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `|t|^e` with `0^e = 0` for positive `e`.
#[inline]
pub fn pow_abs<S: Real>(t: S, e: S) -> S {
    let a = t.abs();
    if a == S::zero() {
        if e > S::zero() {
            S::zero()
        } else if e == S::zero() {
            S::one()
        } else {
            S::infinity()
        }
    } else {
        a.powf(e)
    }
}

/// `sign(t) * |t|^e`.
#[inline]
pub fn signed_pow<S: Real>(t: S, e: S) -> S {
    let v = pow_abs(t, e);
    if t < S::zero() {
        -v
    } else {
        v
    }
}
