//! Floating-point abstraction shared by the tensor, norm and estimator code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the deterministic estimates are computed in: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm computed with scaling so large or tiny entries do not overflow.
pub fn l2_norm<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if m == T::zero() || !m.is_finite() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x / m) * (x / m)).sum();
    m * s.sqrt()
}

/// `(sum |x|^p)^(1/p)` for `p >= 1`, evaluated relative to the largest magnitude.
pub fn lp_norm<T: Scalar>(xs: &[T], p: T) -> T {
    let m = xs.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if m == T::zero() || !m.is_finite() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x.abs() / m).powf(p)).sum();
    m * s.powf(p.recip())
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
