//! Complex multiple-double values: real and imaginary parts are kept as
//! separate expansions of the same precision level.

use super::{MultiDouble, Precision};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMultiDouble {
    pub re: MultiDouble,
    pub im: MultiDouble,
}

impl ComplexMultiDouble {
    pub fn new(re: MultiDouble, im: MultiDouble) -> Self {
        assert_eq!(re.precision(), im.precision(), "precision mismatch");
        ComplexMultiDouble { re, im }
    }

    pub fn zero(m: Precision) -> Self {
        ComplexMultiDouble { re: MultiDouble::zero(m), im: MultiDouble::zero(m) }
    }

    pub fn one(m: Precision) -> Self {
        ComplexMultiDouble { re: MultiDouble::one(m), im: MultiDouble::zero(m) }
    }

    pub fn from_re(re: MultiDouble) -> Self {
        ComplexMultiDouble { im: MultiDouble::zero(re.precision()), re }
    }

    pub fn precision(&self) -> Precision {
        self.re.precision()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        ComplexMultiDouble { re: self.re.add(&rhs.re), im: self.im.add(&rhs.im) }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        ComplexMultiDouble { re: self.re.sub(&rhs.re), im: self.im.sub(&rhs.im) }
    }

    /// 4 real multiplications, 2 real additions/subtractions.
    pub fn mul(&self, rhs: &Self) -> Self {
        let re = self.re.mul(&rhs.re).sub(&self.im.mul(&rhs.im));
        let im = self.re.mul(&rhs.im).add(&self.im.mul(&rhs.re));
        ComplexMultiDouble { re, im }
    }

    /// Conjugate method: 6 mul, 3 add/sub, 2 div in the real arithmetic.
    pub fn div(&self, rhs: &Self) -> Result<Self, Error> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let den = rhs.re.mul(&rhs.re).add(&rhs.im.mul(&rhs.im));
        let re_num = self.re.mul(&rhs.re).add(&self.im.mul(&rhs.im));
        let im_num = self.im.mul(&rhs.re).sub(&self.re.mul(&rhs.im));
        Ok(ComplexMultiDouble { re: re_num.div(&den)?, im: im_num.div(&den)? })
    }

    pub fn conj(&self) -> Self {
        ComplexMultiDouble { re: self.re, im: self.im.neg() }
    }

    pub fn neg(&self) -> Self {
        ComplexMultiDouble { re: self.re.neg(), im: self.im.neg() }
    }

    /// |z|^2 = re^2 + im^2.
    pub fn norm_sq(&self) -> MultiDouble {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    /// Scale by a real value.
    pub fn scale(&self, s: &MultiDouble) -> Self {
        ComplexMultiDouble { re: self.re.mul(s), im: self.im.mul(s) }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn bits_eq(&self, rhs: &Self) -> bool {
        self.re.bits_eq(&rhs.re) && self.im.bits_eq(&rhs.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(m: Precision, re: f64, im: f64) -> ComplexMultiDouble {
        ComplexMultiDouble::new(MultiDouble::from_f64(m, re), MultiDouble::from_f64(m, im))
    }

    #[test]
    fn one_times_i_is_i() {
        let m = Precision::Dd;
        let p = c(m, 1.0, 0.0).mul(&c(m, 0.0, 1.0));
        assert!(p.re.is_zero());
        assert_eq!(p.im.hi(), 1.0);
    }

    #[test]
    fn conjugate() {
        let z = c(Precision::Qd, 3.0, 4.0);
        let w = z.conj();
        assert_eq!(w.re.hi(), 3.0);
        assert_eq!(w.im.hi(), -4.0);
    }

    #[test]
    fn div_by_zero_errors() {
        let m = Precision::Dd;
        assert!(c(m, 1.0, 2.0).div(&c(m, 0.0, 0.0)).is_err());
    }

    #[test]
    fn div_small_case() {
        // (1+2i)/(3+4i) = (11 + 2i)/25 = 0.44 + 0.08i
        let m = Precision::Dd;
        let q = c(m, 1.0, 2.0).div(&c(m, 3.0, 4.0)).unwrap();
        assert!((q.re.to_f64() - 0.44).abs() < 1e-30);
        assert!((q.im.to_f64() - 0.08).abs() < 1e-30);
    }
}
