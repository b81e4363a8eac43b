//! Element abstraction so kernels are written once and instantiated for
//! real and complex multiple-double data.
//!
//! Every arithmetic method takes the launch tally and charges the number
//! of real multiple-double operations it performs, so flop accounting is
//! exact for both flavors: a complex multiplication is 4 real
//! multiplications plus 2 real additions, a complex division by the
//! conjugate method is 6 multiplications, 3 additions, and 2 divisions.

use crate::error::Error;
use crate::flop::OpCounts;
use crate::layout::{StaggeredMatrix, StaggeredVector};
use crate::md::{ComplexMultiDouble, MultiDouble, Precision};

pub trait Element: Copy + Send + Sync + 'static {
    const COMPLEX: bool;

    fn zero(m: Precision) -> Self;
    fn one(m: Precision) -> Self;
    fn from_re(re: MultiDouble) -> Self;
    fn precision(&self) -> Precision;
    fn is_zero(&self) -> bool;

    fn add(a: &Self, b: &Self, t: &mut OpCounts) -> Self;
    fn sub(a: &Self, b: &Self, t: &mut OpCounts) -> Self;
    fn mul(a: &Self, b: &Self, t: &mut OpCounts) -> Self;
    fn div(a: &Self, b: &Self, t: &mut OpCounts) -> Result<Self, Error>;
    /// Sign flips are free (no limb arithmetic).
    fn neg(&self) -> Self;
    /// Conjugation; the identity for real data, and free either way.
    fn conj(&self) -> Self;
    /// Multiply by a real scalar.
    fn scale_re(&self, s: &MultiDouble, t: &mut OpCounts) -> Self;
    /// |x|^2 as a real value.
    fn norm_sq(&self, t: &mut OpCounts) -> MultiDouble;
    /// |x| as a real value; free for real data (a sign operation), one
    /// square root of the squared norm for complex data.
    fn modulus(&self, t: &mut OpCounts) -> MultiDouble;
    /// The unit direction x / |x| given `h = |x|` (h > 0); free sign pick
    /// for real data, two real divisions for complex. `h = 0` yields one.
    fn unit_dir(&self, h: &MultiDouble, t: &mut OpCounts) -> Self;

    fn read(a: &StaggeredMatrix, i: usize, j: usize) -> Self;
    fn read_vec(v: &StaggeredVector, i: usize) -> Self;
    fn write(a: &mut StaggeredMatrix, i: usize, j: usize, v: &Self) -> Result<(), Error>;
    fn write_vec(x: &mut StaggeredVector, i: usize, v: &Self) -> Result<(), Error>;
    /// Uniform transport representation for launch write buffers.
    fn to_complex(&self) -> ComplexMultiDouble;
    fn from_complex(z: &ComplexMultiDouble) -> Self;

    fn bits_eq(a: &Self, b: &Self) -> bool;
}

impl Element for MultiDouble {
    const COMPLEX: bool = false;

    fn zero(m: Precision) -> Self {
        MultiDouble::zero(m)
    }

    fn one(m: Precision) -> Self {
        MultiDouble::one(m)
    }

    fn from_re(re: MultiDouble) -> Self {
        re
    }

    fn precision(&self) -> Precision {
        MultiDouble::precision(self)
    }

    fn is_zero(&self) -> bool {
        MultiDouble::is_zero(self)
    }

    fn add(a: &Self, b: &Self, t: &mut OpCounts) -> Self {
        t.add += 1;
        MultiDouble::add(a, b)
    }

    fn sub(a: &Self, b: &Self, t: &mut OpCounts) -> Self {
        t.sub += 1;
        MultiDouble::sub(a, b)
    }

    fn mul(a: &Self, b: &Self, t: &mut OpCounts) -> Self {
        t.mul += 1;
        MultiDouble::mul(a, b)
    }

    fn div(a: &Self, b: &Self, t: &mut OpCounts) -> Result<Self, Error> {
        t.div += 1;
        MultiDouble::div(a, b)
    }

    fn neg(&self) -> Self {
        MultiDouble::neg(self)
    }

    fn conj(&self) -> Self {
        *self
    }

    fn scale_re(&self, s: &MultiDouble, t: &mut OpCounts) -> Self {
        t.mul += 1;
        MultiDouble::mul(self, s)
    }

    fn norm_sq(&self, t: &mut OpCounts) -> MultiDouble {
        t.mul += 1;
        MultiDouble::mul(self, self)
    }

    fn modulus(&self, _t: &mut OpCounts) -> MultiDouble {
        self.abs()
    }

    fn unit_dir(&self, h: &MultiDouble, _t: &mut OpCounts) -> Self {
        let m = MultiDouble::precision(self);
        if h.is_zero() || self.hi() >= 0.0 {
            MultiDouble::one(m)
        } else {
            MultiDouble::one(m).neg()
        }
    }

    fn read(a: &StaggeredMatrix, i: usize, j: usize) -> Self {
        a.get(i, j).expect("kernel index in range")
    }

    fn read_vec(v: &StaggeredVector, i: usize) -> Self {
        v.get(i).expect("kernel index in range")
    }

    fn write(a: &mut StaggeredMatrix, i: usize, j: usize, v: &Self) -> Result<(), Error> {
        a.set(i, j, v)
    }

    fn write_vec(x: &mut StaggeredVector, i: usize, v: &Self) -> Result<(), Error> {
        x.set(i, v)
    }

    fn to_complex(&self) -> ComplexMultiDouble {
        ComplexMultiDouble::from_re(*self)
    }

    fn from_complex(z: &ComplexMultiDouble) -> Self {
        debug_assert!(z.im.is_zero(), "real element from complex transport");
        z.re
    }

    fn bits_eq(a: &Self, b: &Self) -> bool {
        MultiDouble::bits_eq(a, b)
    }
}

impl Element for ComplexMultiDouble {
    const COMPLEX: bool = true;

    fn zero(m: Precision) -> Self {
        ComplexMultiDouble::zero(m)
    }

    fn one(m: Precision) -> Self {
        ComplexMultiDouble::one(m)
    }

    fn from_re(re: MultiDouble) -> Self {
        ComplexMultiDouble::from_re(re)
    }

    fn precision(&self) -> Precision {
        ComplexMultiDouble::precision(self)
    }

    fn is_zero(&self) -> bool {
        ComplexMultiDouble::is_zero(self)
    }

    fn add(a: &Self, b: &Self, t: &mut OpCounts) -> Self {
        t.add += 2;
        ComplexMultiDouble::add(a, b)
    }

    fn sub(a: &Self, b: &Self, t: &mut OpCounts) -> Self {
        t.sub += 2;
        ComplexMultiDouble::sub(a, b)
    }

    fn mul(a: &Self, b: &Self, t: &mut OpCounts) -> Self {
        t.mul += 4;
        t.add += 2;
        ComplexMultiDouble::mul(a, b)
    }

    fn div(a: &Self, b: &Self, t: &mut OpCounts) -> Result<Self, Error> {
        t.mul += 6;
        t.add += 3;
        t.div += 2;
        ComplexMultiDouble::div(a, b)
    }

    fn neg(&self) -> Self {
        ComplexMultiDouble::neg(self)
    }

    fn conj(&self) -> Self {
        ComplexMultiDouble::conj(self)
    }

    fn scale_re(&self, s: &MultiDouble, t: &mut OpCounts) -> Self {
        t.mul += 2;
        ComplexMultiDouble::scale(self, s)
    }

    fn norm_sq(&self, t: &mut OpCounts) -> MultiDouble {
        t.mul += 2;
        t.add += 1;
        ComplexMultiDouble::norm_sq(self)
    }

    fn modulus(&self, t: &mut OpCounts) -> MultiDouble {
        t.mul += 2;
        t.add += 1;
        t.sqrt += 1;
        ComplexMultiDouble::norm_sq(self).sqrt().expect("norms are nonnegative")
    }

    fn unit_dir(&self, h: &MultiDouble, t: &mut OpCounts) -> Self {
        let m = self.precision();
        if h.is_zero() {
            return ComplexMultiDouble::one(m);
        }
        t.div += 2;
        ComplexMultiDouble::new(
            self.re.div(h).expect("h > 0"),
            self.im.div(h).expect("h > 0"),
        )
    }

    fn read(a: &StaggeredMatrix, i: usize, j: usize) -> Self {
        a.get_c(i, j).expect("kernel index in range")
    }

    fn read_vec(v: &StaggeredVector, i: usize) -> Self {
        v.get_c(i).expect("kernel index in range")
    }

    fn write(a: &mut StaggeredMatrix, i: usize, j: usize, v: &Self) -> Result<(), Error> {
        a.set_c(i, j, v)
    }

    fn write_vec(x: &mut StaggeredVector, i: usize, v: &Self) -> Result<(), Error> {
        x.set_c(i, v)
    }

    fn to_complex(&self) -> ComplexMultiDouble {
        *self
    }

    fn from_complex(z: &ComplexMultiDouble) -> Self {
        *z
    }

    fn bits_eq(a: &Self, b: &Self) -> bool {
        ComplexMultiDouble::bits_eq(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_ops_count_singly() {
        let m = Precision::Dd;
        let mut t = OpCounts::default();
        let a = MultiDouble::from_f64(m, 3.0);
        let b = MultiDouble::from_f64(m, 2.0);
        let _ = <MultiDouble as Element>::add(&a, &b, &mut t);
        let _ = <MultiDouble as Element>::mul(&a, &b, &mut t);
        let _ = <MultiDouble as Element>::div(&a, &b, &mut t).unwrap();
        assert_eq!(t, OpCounts { add: 1, mul: 1, div: 1, ..Default::default() });
    }

    #[test]
    fn complex_ops_count_decomposed() {
        let m = Precision::Dd;
        let mut t = OpCounts::default();
        let a = ComplexMultiDouble::new(MultiDouble::from_f64(m, 1.0), MultiDouble::from_f64(m, 2.0));
        let b = ComplexMultiDouble::new(MultiDouble::from_f64(m, 3.0), MultiDouble::from_f64(m, 4.0));
        let _ = <ComplexMultiDouble as Element>::mul(&a, &b, &mut t);
        assert_eq!(t, OpCounts { mul: 4, add: 2, ..Default::default() });
        t = OpCounts::default();
        let _ = <ComplexMultiDouble as Element>::div(&a, &b, &mut t).unwrap();
        assert_eq!(t, OpCounts { mul: 6, add: 3, div: 2, ..Default::default() });
        t = OpCounts::default();
        let _ = <ComplexMultiDouble as Element>::norm_sq(&a, &mut t);
        assert_eq!(t, OpCounts { mul: 2, add: 1, ..Default::default() });
    }
}
