//! Multiple-double arithmetic: values represented as the unevaluated sum of
//! 1, 2, 4, or 8 hardware doubles, stored most significant limb first.

mod complex;
mod eft;
mod expansion;
mod parse;

pub use complex::ComplexMultiDouble;
pub use eft::{fast_two_sum, rounding_self_check, two_prod, two_sum};
pub use parse::{format_decimal, parse_decimal, round_trip_digits};

use crate::error::Error;
use std::cmp::Ordering;
use std::fmt;

/// Precision level: the number of binary64 limbs per value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Precision {
    /// plain double, ~16 decimal digits (reference only)
    D,
    /// double double, ~32 decimal digits
    Dd,
    /// quad double, ~64 decimal digits
    Qd,
    /// octo double, ~128 decimal digits
    Od,
}

impl Precision {
    pub const ALL: [Precision; 4] = [Precision::D, Precision::Dd, Precision::Qd, Precision::Od];
    pub const MULTI: [Precision; 3] = [Precision::Dd, Precision::Qd, Precision::Od];

    pub fn limbs(self) -> usize {
        match self {
            Precision::D => 1,
            Precision::Dd => 2,
            Precision::Qd => 4,
            Precision::Od => 8,
        }
    }

    pub fn from_limbs(m: usize) -> Option<Self> {
        match m {
            1 => Some(Precision::D),
            2 => Some(Precision::Dd),
            4 => Some(Precision::Qd),
            8 => Some(Precision::Od),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Precision::D => "d",
            Precision::Dd => "dd",
            Precision::Qd => "qd",
            Precision::Od => "od",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "d" => Some(Precision::D),
            "dd" => Some(Precision::Dd),
            "qd" => Some(Precision::Qd),
            "od" => Some(Precision::Od),
            _ => None,
        }
    }

    /// Unit roundoff at this level: 2^(-53 m).
    pub fn unit_roundoff(self) -> f64 {
        f64::powi(2.0, -53 * self.limbs() as i32)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// An extended-precision value: a significance-ordered, pairwise
/// non-overlapping expansion of `m` binary64 limbs whose exact sum is the
/// represented value.
#[derive(Debug, Clone, Copy)]
pub struct MultiDouble {
    m: Precision,
    limbs: [f64; 8],
}

macro_rules! dispatch1 {
    ($m:expr, $x:expr, $f:path) => {{
        match $m {
            Precision::Dd => store::<2>($f(&load::<2>($x))),
            Precision::Qd => store::<4>($f(&load::<4>($x))),
            Precision::Od => store::<8>($f(&load::<8>($x))),
            Precision::D => unreachable!(),
        }
    }};
}

macro_rules! dispatch2 {
    ($m:expr, $x:expr, $y:expr, $f:path) => {{
        match $m {
            Precision::Dd => store::<2>($f(&load::<2>($x), &load::<2>($y))),
            Precision::Qd => store::<4>($f(&load::<4>($x), &load::<4>($y))),
            Precision::Od => store::<8>($f(&load::<8>($x), &load::<8>($y))),
            Precision::D => unreachable!(),
        }
    }};
}

#[inline(always)]
fn load<const M: usize>(limbs: &[f64; 8]) -> [f64; M] {
    let mut out = [0.0; M];
    out.copy_from_slice(&limbs[..M]);
    out
}

#[inline(always)]
fn store<const M: usize>(x: [f64; M]) -> [f64; 8] {
    let mut out = [0.0; 8];
    out[..M].copy_from_slice(&x);
    out
}

impl MultiDouble {
    pub fn zero(m: Precision) -> Self {
        MultiDouble { m, limbs: [0.0; 8] }
    }

    pub fn one(m: Precision) -> Self {
        Self::from_f64(m, 1.0)
    }

    /// A value with a single leading limb; exact for any finite `v`.
    pub fn from_f64(m: Precision, v: f64) -> Self {
        let mut limbs = [0.0; 8];
        limbs[0] = v;
        MultiDouble { m, limbs }
    }

    /// Reassemble a value from limbs that are already normalized (e.g. read
    /// back from staggered storage). Does not renormalize, so storage round
    /// trips are bit-exact.
    pub(crate) fn from_normalized_limbs(m: Precision, src: &[f64]) -> Self {
        debug_assert_eq!(src.len(), m.limbs());
        let mut limbs = [0.0; 8];
        limbs[..src.len()].copy_from_slice(src);
        MultiDouble { m, limbs }
    }

    /// Renormalize an arbitrary sequence of doubles into an `m`-limb value.
    /// The input may be unordered and overlapping; the result is the exact
    /// sum faithfully rounded to `m` limbs.
    pub fn renormalize(expansion: &[f64], m: Precision) -> Result<Self, Error> {
        if expansion.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut terms: Vec<f64> = expansion.to_vec();
        terms.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        if m == Precision::D {
            let mut s = 0.0;
            // exact-as-possible plain accumulation, most significant last
            for &t in terms.iter().rev() {
                s += t;
            }
            return Ok(Self::from_f64(m, s));
        }
        // A couple of accumulation sweeps make the sequence ordered enough
        // for the extraction pass even under heavy cancellation.
        let limbs = match m {
            Precision::Dd => store::<2>(renorm_multi_pass::<2>(&mut terms)),
            Precision::Qd => store::<4>(renorm_multi_pass::<4>(&mut terms)),
            Precision::Od => store::<8>(renorm_multi_pass::<8>(&mut terms)),
            Precision::D => unreachable!(),
        };
        Ok(MultiDouble { m, limbs })
    }

    pub fn precision(&self) -> Precision {
        self.m
    }

    /// The active limbs, most significant first.
    pub fn limbs(&self) -> &[f64] {
        &self.limbs[..self.m.limbs()]
    }

    /// Leading limb (the closest plain double for normalized values).
    pub fn hi(&self) -> f64 {
        self.limbs[0]
    }

    /// Best plain-double approximation.
    pub fn to_f64(&self) -> f64 {
        if self.m == Precision::D {
            self.limbs[0]
        } else {
            self.limbs[0] + self.limbs[1]
        }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs[0] == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.limbs().iter().all(|l| l.is_finite())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.m, rhs.m, "precision mismatch");
        if self.m == Precision::D {
            return Self::from_f64(self.m, self.limbs[0] + rhs.limbs[0]);
        }
        MultiDouble { m: self.m, limbs: dispatch2!(self.m, &self.limbs, &rhs.limbs, expansion::add) }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.m, rhs.m, "precision mismatch");
        if self.m == Precision::D {
            return Self::from_f64(self.m, self.limbs[0] - rhs.limbs[0]);
        }
        MultiDouble { m: self.m, limbs: dispatch2!(self.m, &self.limbs, &rhs.limbs, expansion::sub) }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.m, rhs.m, "precision mismatch");
        if self.m == Precision::D {
            return Self::from_f64(self.m, self.limbs[0] * rhs.limbs[0]);
        }
        MultiDouble { m: self.m, limbs: dispatch2!(self.m, &self.limbs, &rhs.limbs, expansion::mul) }
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, Error> {
        assert_eq!(self.m, rhs.m, "precision mismatch");
        if rhs.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if self.m == Precision::D {
            return Ok(Self::from_f64(self.m, self.limbs[0] / rhs.limbs[0]));
        }
        Ok(MultiDouble { m: self.m, limbs: dispatch2!(self.m, &self.limbs, &rhs.limbs, expansion::div) })
    }

    pub fn sqrt(&self) -> Result<Self, Error> {
        if self.is_zero() {
            return Ok(*self);
        }
        if self.limbs[0] < 0.0 {
            return Err(Error::SqrtOfNegative);
        }
        if self.m == Precision::D {
            return Ok(Self::from_f64(self.m, self.limbs[0].sqrt()));
        }
        Ok(MultiDouble { m: self.m, limbs: dispatch1!(self.m, &self.limbs, expansion::sqrt) })
    }

    pub fn neg(&self) -> Self {
        let mut limbs = self.limbs;
        for l in &mut limbs {
            *l = -*l;
        }
        MultiDouble { m: self.m, limbs }
    }

    pub fn abs(&self) -> Self {
        if self.limbs[0] < 0.0 {
            self.neg()
        } else {
            *self
        }
    }

    /// Exact scaling by a power of two.
    pub fn scale_pow2(&self, s: f64) -> Self {
        let mut limbs = self.limbs;
        for l in &mut limbs {
            *l *= s;
        }
        MultiDouble { m: self.m, limbs }
    }

    /// Total order on values (representations are compared by value; both
    /// sides are normalized by construction).
    pub fn cmp_value(&self, rhs: &Self) -> Ordering {
        let d = self.sub(rhs);
        if d.limbs[0] > 0.0 {
            Ordering::Greater
        } else if d.limbs[0] < 0.0 {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }

    /// Limb-for-limb bit equality (canonical representation equality).
    pub fn bits_eq(&self, rhs: &Self) -> bool {
        self.m == rhs.m
            && self.limbs()
                .iter()
                .zip(rhs.limbs())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Renormalization for sorted-by-magnitude input of arbitrary overlap:
/// repeat the accumulation sweep until the ordering needed by the
/// extraction pass holds, then extract.
fn renorm_multi_pass<const M: usize>(terms: &mut [f64]) -> [f64; M] {
    if terms.is_empty() {
        return [0.0; M];
    }
    let passes = terms.len().min(4);
    for _ in 0..passes.saturating_sub(1) {
        expansion::vec_sum(terms);
        if terms.windows(2).all(|w| w[0].abs() >= w[1].abs() || w[0] == 0.0) {
            break;
        }
    }
    expansion::renorm::<M>(terms)
}

impl PartialEq for MultiDouble {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_value(other) == Ordering::Equal
    }
}

impl PartialOrd for MultiDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_value(other))
    }
}

impl std::ops::Add for MultiDouble {
    type Output = MultiDouble;
    fn add(self, rhs: Self) -> Self {
        MultiDouble::add(&self, &rhs)
    }
}

impl std::ops::Sub for MultiDouble {
    type Output = MultiDouble;
    fn sub(self, rhs: Self) -> Self {
        MultiDouble::sub(&self, &rhs)
    }
}

impl std::ops::Mul for MultiDouble {
    type Output = MultiDouble;
    fn mul(self, rhs: Self) -> Self {
        MultiDouble::mul(&self, &rhs)
    }
}

impl std::ops::Neg for MultiDouble {
    type Output = MultiDouble;
    fn neg(self) -> Self {
        MultiDouble::neg(&self)
    }
}

impl fmt::Display for MultiDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_decimal(self, round_trip_digits(self.m)))
    }
}


/// Unit in the last place of `|x|`; used by overlap checks.
#[cfg(test)]
pub(crate) fn ulp(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let b = x.abs().to_bits();
    f64::from_bits(b + 1) - f64::from_bits(b)
}
