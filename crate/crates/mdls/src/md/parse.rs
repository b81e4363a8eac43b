//! Decimal string conversion for multiple-double values.
//!
//! Formatting and parsing go through exact integer arithmetic so that a
//! value printed with at least 16·m significant digits parses back to the
//! identical expansion.

use super::{MultiDouble, Precision};
use crate::error::Error;
use num_bigint::{BigInt, Sign};
use num_traits::{Signed, ToPrimitive, Zero};

/// Decompose a finite double as `mant * 2^exp` with integer `mant`.
fn f64_to_int_exp(x: f64) -> (BigInt, i64) {
    if x == 0.0 {
        return (BigInt::zero(), 0);
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
    let mut m = BigInt::from(mant);
    if neg {
        m = -m;
    }
    (m, exp)
}

/// Exact sum of the limbs as `num * 2^exp`.
fn exact_value(x: &MultiDouble) -> (BigInt, i64) {
    let mut num = BigInt::zero();
    let mut exp = 0i64;
    for &l in x.limbs() {
        let (n2, e2) = f64_to_int_exp(l);
        if n2.is_zero() {
            continue;
        }
        if num.is_zero() {
            num = n2;
            exp = e2;
        } else if e2 >= exp {
            num += n2 << (e2 - exp) as u64;
        } else {
            num = (num << (exp - e2) as u64) + n2;
            exp = e2;
        }
    }
    (num, exp)
}

fn ldexp(x: f64, e: i64) -> f64 {
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

/// Nearest double to `num * 2^exp`, ties to even.
fn big_to_f64_nearest(num: &BigInt, exp: i64) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let neg = num.sign() == Sign::Minus;
    let mag = num.abs();
    let bits = mag.bits() as i64;
    let v = if bits <= 54 {
        ldexp(mag.to_f64().unwrap(), exp)
    } else {
        let k = bits - 54;
        let top: BigInt = &mag >> k as u64;
        let rest = &mag - (&top << k as u64);
        let t = top.to_u64().unwrap(); // 54 bits
        let mut mant = t >> 1;
        let guard = t & 1 == 1;
        let sticky = !rest.is_zero();
        if guard && (sticky || mant & 1 == 1) {
            mant += 1;
        }
        ldexp(mant as f64, exp + k + 1)
    };
    if neg {
        -v
    } else {
        v
    }
}

/// Number of significant decimal digits guaranteed to round-trip an
/// `m`-limb expansion through [`format_decimal`]/[`parse_decimal`].
/// The guard digits cover expansions whose limbs alternate in sign and
/// therefore span a few more bits than 53·m.
pub fn round_trip_digits(m: Precision) -> usize {
    16 * m.limbs() + 10
}

/// Format with the given number of significant decimal digits, scientific
/// notation. [`round_trip_digits`] digits round-trip exactly.
pub fn format_decimal(x: &MultiDouble, digits: usize) -> String {
    let digits = digits.max(1);
    let (num, exp) = exact_value(x);
    if num.is_zero() {
        return "0.0e0".to_string();
    }
    let neg = num.sign() == Sign::Minus;
    let mag = num.abs();
    // first estimate of the decimal exponent from the binary magnitude
    let log2 = (mag.bits() as i64 - 1) + exp;
    let mut e10 = (log2 as f64 * std::f64::consts::LOG10_2).floor() as i64;
    loop {
        let p = digits as i64 - 1 - e10;
        let mut n = mag.clone();
        let mut d = BigInt::from(1);
        if p >= 0 {
            n *= BigInt::from(10).pow(p as u32);
        } else {
            d *= BigInt::from(10).pow((-p) as u32);
        }
        if exp >= 0 {
            n <<= exp as u64;
        } else {
            d <<= (-exp) as u64;
        }
        // round half away from zero; guard digits make the bias immaterial
        let q: BigInt = (&n * 2 + &d) / (&d * 2);
        let s = q.to_string();
        if s.len() == digits {
            let mut out = String::new();
            if neg {
                out.push('-');
            }
            out.push_str(&s[..1]);
            out.push('.');
            out.push_str(&s[1..]);
            out.push('e');
            out.push_str(&e10.to_string());
            return out;
        }
        // carry or estimate off by one
        e10 += s.len() as i64 - digits as i64;
    }
}

/// Parse a decimal string (`[+-]ddd[.ddd][e[+-]ddd]`) to the nearest
/// `m`-limb expansion.
pub fn parse_decimal(s: &str, m: Precision) -> Result<MultiDouble, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid decimal literal: {s:?}"));
    let mut chars = s.chars().peekable();
    let mut neg = false;
    if let Some(&c) = chars.peek() {
        if c == '+' || c == '-' {
            neg = c == '-';
            chars.next();
        }
    }
    let mut digits = String::new();
    let mut frac_len = 0i64;
    let mut exp10 = 0i64;
    let mut seen_digit = false;
    let mut in_frac = false;
    while let Some(&c) = chars.peek() {
        match c {
            '0'..='9' => {
                digits.push(c);
                seen_digit = true;
                if in_frac {
                    frac_len += 1;
                }
                chars.next();
            }
            '.' if !in_frac => {
                in_frac = true;
                chars.next();
            }
            'e' | 'E' => {
                chars.next();
                let rest: String = chars.collect();
                exp10 = rest.parse::<i64>().map_err(|_| bad())?;
                chars = "".chars().peekable();
            }
            _ => return Err(bad()),
        }
    }
    if !seen_digit {
        return Err(bad());
    }
    let d: BigInt = digits.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Ok(MultiDouble::zero(m));
    }
    let f = exp10 - frac_len;
    // dyadic approximation of d * 10^f with generous guard bits
    let target_bits = 53 * m.limbs() as i64 + 40;
    let (mut num, den) = if f >= 0 {
        (&d * BigInt::from(10).pow(f as u32), BigInt::from(1))
    } else {
        (d.clone(), BigInt::from(10).pow((-f) as u32))
    };
    let mut exp2 = 0i64;
    let shift = (target_bits + den.bits() as i64 + 2 - num.bits() as i64).max(0);
    num <<= shift as u64;
    exp2 -= shift;
    let mut rem_num = &num / &den; // truncation error below the guard bits
    let mut rem_exp = exp2;
    if neg {
        rem_num = -rem_num;
    }
    // greedy extraction of the nearest expansion
    let mut limbs = Vec::with_capacity(m.limbs());
    for _ in 0..m.limbs() {
        let l = big_to_f64_nearest(&rem_num, rem_exp);
        limbs.push(l);
        if l == 0.0 {
            break;
        }
        let (ln, le) = f64_to_int_exp(l);
        if le >= rem_exp {
            rem_num -= ln << (le - rem_exp) as u64;
        } else {
            rem_num = (rem_num << (rem_exp - le) as u64) - ln;
            rem_exp = le;
        }
    }
    MultiDouble::renormalize(&limbs, m)
}
