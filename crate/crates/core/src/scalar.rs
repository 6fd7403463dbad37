//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point type the geometry and polynomial code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are given
/// as `f64` literals and converted with [`Real::lit`]; they are calibrated for
/// double precision.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_two_pi<T: Real>(angle: T) -> T {
    let tau = T::TAU();
    let w = angle % tau;
    if w < T::zero() {
        w + tau
    } else {
        w
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_pi<T: Real>(angle: T) -> T {
    let w = wrap_two_pi(angle);
    if w > T::PI() {
        w - T::TAU()
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert!((wrap_two_pi(-0.5f64) - (std::f64::consts::TAU - 0.5)).abs() < 1e-15);
        assert!((wrap_pi(3.5f64) - (3.5 - std::f64::consts::TAU)).abs() < 1e-15);
        assert_eq!(wrap_pi(std::f64::consts::PI), std::f64::consts::PI);
        assert_eq!(<f32 as Real>::lit(0.25), 0.25f32);
    }
}
