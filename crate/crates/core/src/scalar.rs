//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All dense linear algebra is written against [`Real`], which is implemented
//! for `f32` and `f64`. Complex entries are `Complex<R>`.

use nalgebra::{Complex, RealField};
use num_traits::ToPrimitive;

/// Real floating point type the library can be instantiated with.
pub trait Real: RealField + Copy + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal (constants, tolerances) into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }

    /// Base-2 logarithm.
    #[inline]
    fn lg(self) -> Self {
        self.ln() / Self::ln_2()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub fn cplx<R: Real>(re: f64, im: f64) -> Complex<R> {
    Complex::new(R::lit(re), R::lit(im))
}

#[inline]
pub fn creal<R: Real>(re: R) -> Complex<R> {
    Complex::new(re, R::zero())
}

/// Squared modulus.
#[inline]
pub fn abs2<R: Real>(z: Complex<R>) -> R {
    z.re * z.re + z.im * z.im
}

/// Modulus |z|.
#[inline]
pub fn cabs<R: Real>(z: Complex<R>) -> R {
    abs2(z).sqrt()
}
