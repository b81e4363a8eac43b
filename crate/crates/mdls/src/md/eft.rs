//! Error-free transformations: the exact building blocks of expansion
//! arithmetic. Every function returns the rounded result together with the
//! exact rounding error, assuming round-to-nearest-even binary64.

/// Exact sum: `s = fl(a + b)` and `s + e = a + b` exactly, for any finite
/// `a`, `b` whose sum does not overflow. Branch-free Knuth version.
#[inline(always)]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Exact sum under the precondition `|a| >= |b|` (or `a == 0`).
#[inline(always)]
pub fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Exact product: `p = fl(a * b)` and `p + e = a * b` exactly, barring
/// overflow and underflow of the error term.
#[cfg(not(feature = "no-fma"))]
#[inline(always)]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = f64::mul_add(a, b, -p);
    (p, e)
}

/// Dekker-splitting fallback for targets without a trustworthy fused
/// multiply-add.
#[cfg(feature = "no-fma")]
#[inline(always)]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    #[inline(always)]
    fn split(a: f64) -> (f64, f64) {
        let t = SPLIT * a;
        let hi = t - (t - a);
        (hi, a - hi)
    }
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, e)
}

/// Runtime guard against fast-math style compilation or a non-default
/// rounding mode: both would silently break every error-free transform.
pub fn rounding_self_check() -> bool {
    let two53 = 9_007_199_254_740_992.0f64; // 2^53
    let (s, e) = two_sum(two53, 1.0);
    if s != two53 || e != 1.0 {
        return false;
    }
    // (1 + 2^-52)^2 = 1 + 2^-51 + 2^-104: the square term must survive.
    let u = 1.0 + f64::powi(2.0, -52);
    let (p, e) = two_prod(u, u);
    p == 1.0 + f64::powi(2.0, -51) && e == f64::powi(2.0, -104)
}
