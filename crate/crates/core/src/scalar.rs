use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the factorization math is generic over.
///
/// Implemented for `f32` and `f64`. Training and evaluation only need field
/// operations plus `sqrt`/`ln`, so any IEEE float works.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Digits after the decimal point needed for `{:.*e}` to round-trip.
    const ROUND_TRIP_PRECISION: usize;

    fn of(x: f64) -> Self;

    fn of_usize(n: usize) -> Self;
}

impl Scalar for f32 {
    const ROUND_TRIP_PRECISION: usize = 8;

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f32
    }
}

impl Scalar for f64 {
    const ROUND_TRIP_PRECISION: usize = 16;

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f64
    }
}

/// Sequential multiply-accumulate. The fixed left-to-right order keeps
/// training runs bitwise reproducible.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc + x * y;
    }
    acc
}

/// Euclidean norm.
#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_norm() {
        assert_eq!(dot(&[1.0f64, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(norm(&[3.0f32, 4.0]), 5.0);
        assert_eq!(dot::<f64>(&[], &[]), 0.0);
    }

    #[test]
    fn round_trip_precision_is_enough() {
        let x = 0.1f64 + 0.2;
        let s = format!("{:.*e}", f64::ROUND_TRIP_PRECISION, x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        let y = 1.0f32 / 3.0;
        let s = format!("{:.*e}", f32::ROUND_TRIP_PRECISION, y);
        assert_eq!(s.parse::<f32>().unwrap(), y);
    }
}
