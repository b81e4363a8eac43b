//! Exact dyadic-rational arithmetic for test verification.
//!
//! Every binary64 and every multiple-double value is a dyadic rational
//! (integer over a power of two), so sums, differences, and products of
//! such values can be checked with no rounding at all. This module keeps
//! its own float decomposition helpers, independent of the conversion code
//! in the arithmetic crate it verifies.
//!
//! Division is never performed on dyadic values. Exact least squares
//! solutions come from Cramer's rule with fraction-free (Bareiss)
//! determinants over big integers, and quotient checks are phrased as
//! multiplied-through comparisons.

use crate::error::Error;
use crate::md::{ComplexMultiDouble, MultiDouble, Precision};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

/// Exact value `num * 2^exp` with `num` odd (or zero with `exp = 0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicRational {
    num: BigInt,
    exp: i64,
}

impl DyadicRational {
    pub fn zero() -> Self {
        DyadicRational { num: BigInt::zero(), exp: 0 }
    }

    pub fn from_int(n: i64) -> Self {
        DyadicRational { num: BigInt::from(n), exp: 0 }.canon()
    }

    pub fn from_bigint(n: BigInt) -> Self {
        DyadicRational { num: n, exp: 0 }.canon()
    }

    /// `n * 2^exp` for arbitrary integer n.
    pub fn from_parts(num: BigInt, exp: i64) -> Self {
        DyadicRational { num, exp }.canon()
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "oracle requires finite input");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let mut num = BigInt::from(mant);
        if neg {
            num = -num;
        }
        DyadicRational { num, exp }.canon()
    }

    /// Exact sum of the limbs of a multiple-double value.
    pub fn from_md(x: &MultiDouble) -> Self {
        x.limbs().iter().fold(Self::zero(), |acc, &l| acc.add(&Self::from_f64(l)))
    }

    fn canon(mut self) -> Self {
        if self.num.is_zero() {
            self.exp = 0;
            return self;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0) as i64;
        if tz > 0 {
            self.num >>= tz as u64;
            self.exp += tz;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(rhs.exp);
        let a = &self.num << (self.exp - e) as u64;
        let b = &rhs.num << (rhs.exp - e) as u64;
        DyadicRational { num: a + b, exp: e }.canon()
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        DyadicRational { num: &self.num * &rhs.num, exp: self.exp + rhs.exp }.canon()
    }

    pub fn neg(&self) -> Self {
        DyadicRational { num: -&self.num, exp: self.exp }
    }

    pub fn abs(&self) -> Self {
        DyadicRational { num: self.num.abs(), exp: self.exp }
    }

    /// Exact multiplication by `2^k`.
    pub fn scale_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        DyadicRational { num: self.num.clone(), exp: self.exp + k }
    }

    pub fn cmp(&self, rhs: &Self) -> Ordering {
        let d = self.sub(rhs);
        if d.num.is_zero() {
            Ordering::Equal
        } else if d.num.is_negative() {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    pub fn cmp_abs(&self, rhs: &Self) -> Ordering {
        self.abs().cmp(&rhs.abs())
    }

    /// Nearest binary64, ties to even.
    pub fn to_f64_nearest(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let neg = self.num.is_negative();
        let mag = self.num.abs();
        let bits = mag.bits() as i64;
        let v = if bits <= 53 {
            let m = mag.to_f64().unwrap();
            pow2_scale(m, self.exp)
        } else {
            let k = (bits - 54) as u64;
            let top: BigInt = &mag >> k;
            let rest = &mag - (&top << k);
            let t = top.to_u64().unwrap();
            let mut mant = t >> 1;
            if t & 1 == 1 && (!rest.is_zero() || mant & 1 == 1) {
                mant += 1;
            }
            pow2_scale(mant as f64, self.exp + k as i64 + 1)
        };
        if neg {
            -v
        } else {
            v
        }
    }

    /// Nearest `m`-limb expansion: greedy nearest-double extraction.
    pub fn to_nearest_expansion(&self, m: Precision) -> MultiDouble {
        let mut rem = self.clone();
        let mut limbs = Vec::with_capacity(m.limbs());
        for _ in 0..m.limbs() {
            let l = rem.to_f64_nearest();
            limbs.push(l);
            if l == 0.0 {
                break;
            }
            rem = rem.sub(&Self::from_f64(l));
        }
        MultiDouble::renormalize(&limbs, m).expect("finite limbs")
    }
}

fn pow2_scale(x: f64, e: i64) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= f64::powi(2.0, 1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= f64::powi(2.0, -1000);
        e += 1000;
    }
    x * f64::powi(2.0, e as i32)
}

/// Complex value with exact dyadic real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicComplex {
    pub re: DyadicRational,
    pub im: DyadicRational,
}

impl DyadicComplex {
    pub fn zero() -> Self {
        DyadicComplex { re: DyadicRational::zero(), im: DyadicRational::zero() }
    }

    pub fn from_cmd(z: &ComplexMultiDouble) -> Self {
        DyadicComplex { re: DyadicRational::from_md(&z.re), im: DyadicRational::from_md(&z.im) }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        DyadicComplex { re: self.re.add(&rhs.re), im: self.im.add(&rhs.im) }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        DyadicComplex { re: self.re.sub(&rhs.re), im: self.im.sub(&rhs.im) }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        DyadicComplex {
            re: self.re.mul(&rhs.re).sub(&self.im.mul(&rhs.im)),
            im: self.re.mul(&rhs.im).add(&self.im.mul(&rhs.re)),
        }
    }

    /// |z|^2, exact.
    pub fn norm_sq(&self) -> DyadicRational {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }
}

/// Exact residual `b - A x` of a real system; `a` is row-major.
pub fn exact_residual(
    a: &[Vec<DyadicRational>],
    x: &[DyadicRational],
    b: &[DyadicRational],
) -> Vec<DyadicRational> {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(row, bi)| {
            assert_eq!(row.len(), x.len());
            let ax = row
                .iter()
                .zip(x)
                .fold(DyadicRational::zero(), |acc, (aij, xj)| acc.add(&aij.mul(xj)));
            bi.sub(&ax)
        })
        .collect()
}

/// Exact residual of a complex system.
pub fn exact_residual_complex(
    a: &[Vec<DyadicComplex>],
    x: &[DyadicComplex],
    b: &[DyadicComplex],
) -> Vec<DyadicComplex> {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(row, bi)| {
            assert_eq!(row.len(), x.len());
            let ax = row
                .iter()
                .zip(x)
                .fold(DyadicComplex::zero(), |acc, (aij, xj)| acc.add(&aij.mul(xj)));
            bi.sub(&ax)
        })
        .collect()
}

/// Exact rational solution of the normal equations, kept as a shared-
/// denominator integer vector: `x_i = num[i] / den`.
#[derive(Debug, Clone)]
pub struct RationalSolution {
    pub num: Vec<BigInt>,
    pub den: BigInt,
}

impl RationalSolution {
    /// Component `i` as a nearest double (for display in diagnostics).
    pub fn approx(&self, i: usize) -> f64 {
        // good enough for messages: both magnitudes fit comfortably in f64
        // for the small integer systems the oracle is used on
        self.num[i].to_f64().unwrap_or(f64::NAN) / self.den.to_f64().unwrap_or(f64::NAN)
    }

    /// Whether `|x - num[i]/den| <= tol`, decided exactly by multiplying
    /// the inequality through by `|den|`.
    pub fn within(&self, i: usize, x: &DyadicRational, tol: &DyadicRational) -> bool {
        let den = DyadicRational::from_bigint(self.den.clone());
        let diff = x.mul(&den).sub(&DyadicRational::from_bigint(self.num[i].clone()));
        diff.cmp_abs(&tol.mul(&den)) != Ordering::Greater
    }
}

/// Determinant by fraction-free (Bareiss) elimination; all intermediate
/// divisions are exact over the integers.
fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = t.div_exact(&prev);
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    sign * m[n - 1][n - 1].clone()
}

trait DivExact {
    fn div_exact(&self, d: &BigInt) -> BigInt;
}

impl DivExact for BigInt {
    fn div_exact(&self, d: &BigInt) -> BigInt {
        let (q, r) = self.div_rem(d);
        debug_assert!(r.is_zero(), "Bareiss division must be exact");
        q
    }
}

/// Exact least squares solution of the normal equations `AᵀA x = Aᵀb` by
/// Cramer's rule with fraction-free determinants. `a` is row-major with at
/// most 12 columns (cost guard).
pub fn exact_lstsq_small(
    a: &[Vec<DyadicRational>],
    b: &[DyadicRational],
) -> Result<RationalSolution, Error> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || rows < cols {
        return Err(Error::ShapeMismatch(format!(
            "least squares oracle needs rows >= cols >= 1, got {rows}x{cols}"
        )));
    }
    if cols > 12 {
        return Err(Error::InvalidConfig(format!(
            "oracle cost guard: at most 12 columns, got {cols}"
        )));
    }
    if b.len() != rows {
        return Err(Error::ShapeMismatch(format!(
            "rhs length {} does not match {rows} rows",
            b.len()
        )));
    }
    // normal matrix G = AᵀA and right-hand side r = Aᵀb, exact
    let dot = |p: &dyn Fn(usize) -> DyadicRational, q: &dyn Fn(usize) -> DyadicRational| {
        (0..rows).fold(DyadicRational::zero(), |acc, k| acc.add(&p(k).mul(&q(k))))
    };
    let g: Vec<Vec<DyadicRational>> = (0..cols)
        .map(|i| {
            (0..cols)
                .map(|j| dot(&|k| a[k][i].clone(), &|k| a[k][j].clone()))
                .collect()
        })
        .collect();
    let r: Vec<DyadicRational> = (0..cols)
        .map(|i| dot(&|k| a[k][i].clone(), &|k| b[k].clone()))
        .collect();
    // scale everything by a common power of two so all entries are integers;
    // the scale cancels in each Cramer ratio
    let min_exp = g
        .iter()
        .flatten()
        .chain(&r)
        .filter(|d| !d.is_zero())
        .map(|d| d.exp)
        .min()
        .unwrap_or(0)
        .min(0);
    let to_int = |d: &DyadicRational| -> BigInt {
        if d.is_zero() {
            BigInt::zero()
        } else {
            &d.num << (d.exp - min_exp) as u64
        }
    };
    let gi: Vec<Vec<BigInt>> = g.iter().map(|row| row.iter().map(to_int).collect()).collect();
    let ri: Vec<BigInt> = r.iter().map(to_int).collect();
    let den = bareiss_det(gi.clone());
    if den.is_zero() {
        return Err(Error::ShapeMismatch(
            "normal matrix is singular over the rationals".to_string(),
        ));
    }
    let num = (0..cols)
        .map(|j| {
            let mut mj = gi.clone();
            for (row, rv) in mj.iter_mut().zip(&ri) {
                row[j] = rv.clone();
            }
            bareiss_det(mj)
        })
        .collect();
    Ok(RationalSolution { num, den })
}
