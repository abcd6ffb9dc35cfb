//! Scalar abstraction shared by every kernel.
//!
//! Only `f64` is instantiated. Every algorithm is written against [`Scalar`]
//! and calls [`Scalar::conj`] wherever an adjoint appears, so a complex
//! instantiation only needs a new `impl`.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::NumAssign;

pub trait Scalar:
    Copy + Send + Sync + Debug + PartialEq + NumAssign + std::ops::Neg<Output = Self> + Sum + 'static
{
    fn conj(self) -> Self;
    /// Modulus.
    fn abs(self) -> f64;
    /// Squared modulus.
    fn abs2(self) -> f64;
    fn from_f64(x: f64) -> Self;
    /// Real part.
    fn re(self) -> f64;
    fn scale(self, r: f64) -> Self;
    fn is_finite(self) -> bool;
    /// Bytes of storage for one entry.
    const BYTES: usize;
}

impl Scalar for f64 {
    #[inline(always)]
    fn conj(self) -> Self {
        self
    }
    #[inline(always)]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline(always)]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline(always)]
    fn re(self) -> f64 {
        self
    }
    #[inline(always)]
    fn scale(self, r: f64) -> Self {
        self * r
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    const BYTES: usize = 8;
}

/// Euclidean norm of a slice, computed with scaling to avoid overflow.
pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    let mut scale = 0.0f64;
    let mut ssq = 1.0f64;
    for v in x {
        let a = v.abs();
        if a.is_nan() {
            return f64::NAN;
        }
        if a > 0.0 {
            if scale < a {
                ssq = 1.0 + ssq * (scale / a) * (scale / a);
                scale = a;
            } else {
                ssq += (a / scale) * (a / scale);
            }
        }
    }
    scale * ssq.sqrt()
}

/// Conjugated dot product `x^* y`.
#[inline]
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(a, b)| a.conj() * *b).sum()
}

pub fn norm_inf<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs()).fold(0.0, f64::max)
}
