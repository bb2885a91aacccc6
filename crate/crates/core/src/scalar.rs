//! Scalar field abstraction shared by every coefficient-space routine.

use std::fmt::{Debug, Display};

use nalgebra::ComplexField;
use num_complex::Complex64;

/// Real or complex double precision.
pub trait Scalar:
    ComplexField<RealField = f64> + Copy + Default + Debug + Display + Send + Sync + 'static
{
    const IS_COMPLEX: bool;

    fn to_c64(self) -> Complex64;

    /// Real projection for `f64`, identity for `Complex64`.
    fn from_c64(z: Complex64) -> Self;

    fn abs_val(self) -> f64 {
        self.modulus()
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    #[inline]
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    #[inline]
    fn from_c64(z: Complex64) -> Self {
        z.re
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    #[inline]
    fn to_c64(self) -> Complex64 {
        self
    }

    #[inline]
    fn from_c64(z: Complex64) -> Self {
        z
    }
}
