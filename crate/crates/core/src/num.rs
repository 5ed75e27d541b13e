//! Scalar abstraction for the whole crate.
//!
//! All numerics are generic over [`Real`], which is any IEEE float carrying
//! the `num-traits` surface we rely on. Concrete work happens in `f64`
//! (see the aliases at the crate root); `f32` instantiations are exercised
//! in tests to keep the code honestly generic.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating scalar used throughout: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static {}

impl<T> Real for T where
    T: Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
}

/// Complex number over the crate scalar.
pub type Cplx<T> = Complex<T>;

/// Converts an `f64` literal into the generic scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must convert into the scalar type")
}

/// Converts a `usize` count into the generic scalar.
#[inline]
pub fn litu<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize must convert into the scalar type")
}

/// `i` as a complex scalar.
#[inline]
pub fn imag_unit<T: Real>() -> Cplx<T> {
    Cplx::new(T::zero(), T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        let x: f64 = lit(0.25);
        assert_eq!(x, 0.25);
        let y: f32 = lit(1.5);
        assert_eq!(y, 1.5f32);
        let n: f64 = litu(7);
        assert_eq!(n, 7.0);
    }

    #[test]
    fn imag_unit_squares_to_minus_one() {
        let i = imag_unit::<f64>();
        assert_eq!(i * i, Cplx::new(-1.0, 0.0));
    }
}
