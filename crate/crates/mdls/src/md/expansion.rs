//! Fixed-size expansion kernels: renormalization and the arithmetic on
//! `M`-term significance-ordered expansions, for `M` in {2, 4, 8}.
//!
//! The renormalization pipeline is the classic two-pass scheme: an
//! error-accumulating sweep (`vec_sum`), extraction of the leading nonzero
//! components, then a refinement sweep that restores the pairwise
//! non-overlap invariant.

use super::eft::{two_prod, two_sum};

/// One error-accumulating sweep from the least towards the most significant
/// term. Preserves the exact sum; afterwards `x[0]` holds the rounded total
/// and the tail holds the accumulated rounding errors in roughly decreasing
/// magnitude.
#[inline]
pub(crate) fn vec_sum(x: &mut [f64]) {
    let n = x.len();
    if n < 2 {
        return;
    }
    let mut s = x[n - 1];
    for i in (0..n - 1).rev() {
        let (hi, lo) = two_sum(x[i], s);
        x[i + 1] = lo;
        s = hi;
    }
    x[0] = s;
}

/// Extract up to `M` leading nonzero components, then sweep the result so
/// that `|out[i+1]| <= ulp(out[i]) / 2` holds pairwise.
#[inline]
fn extract_and_refine<const M: usize>(e: &[f64]) -> [f64; M] {
    let mut out = [0.0f64; M];
    let mut j = 0usize;
    let mut eps = e[0];
    for &t in &e[1..] {
        let (r, lo) = two_sum(eps, t);
        if lo != 0.0 {
            out[j] = r;
            j += 1;
            eps = lo;
            if j == M {
                // The tail lies below the last limb; dropping it keeps the
                // value faithful at M limbs.
                return refine::<M>(out);
            }
        } else {
            eps = r;
        }
    }
    if j < M && eps != 0.0 {
        out[j] = eps;
    }
    refine::<M>(out)
}

/// Push residual overlap between adjacent limbs downwards until
/// `|out[i+1]| <= ulp(out[i]) / 2` holds pairwise.
#[inline]
fn refine<const M: usize>(mut out: [f64; M]) -> [f64; M] {
    for i in 0..M.saturating_sub(1) {
        for k in i..M - 1 {
            let (hi, lo) = two_sum(out[k], out[k + 1]);
            out[k] = hi;
            out[k + 1] = lo;
        }
    }
    out
}

/// Renormalize a term sequence in roughly decreasing magnitude order to an
/// `M`-limb expansion. The value is the faithfully rounded exact sum.
#[inline]
pub(crate) fn renorm<const M: usize>(terms: &mut [f64]) -> [f64; M] {
    if terms.is_empty() {
        return [0.0; M];
    }
    vec_sum(terms);
    extract_and_refine::<M>(terms)
}

/// Addition: merge the two expansions by magnitude and renormalize.
#[inline]
pub(crate) fn add<const M: usize>(x: &[f64; M], y: &[f64; M]) -> [f64; M] {
    let mut merged = [0.0f64; 16];
    let (mut i, mut j, mut k) = (0usize, 0usize, 0usize);
    while i < M && j < M {
        if x[i].abs() >= y[j].abs() {
            merged[k] = x[i];
            i += 1;
        } else {
            merged[k] = y[j];
            j += 1;
        }
        k += 1;
    }
    while i < M {
        merged[k] = x[i];
        i += 1;
        k += 1;
    }
    while j < M {
        merged[k] = y[j];
        j += 1;
        k += 1;
    }
    renorm::<M>(&mut merged[..2 * M])
}

#[inline]
pub(crate) fn neg<const M: usize>(x: &[f64; M]) -> [f64; M] {
    let mut out = *x;
    for l in &mut out {
        *l = -*l;
    }
    out
}

#[inline]
pub(crate) fn sub<const M: usize>(x: &[f64; M], y: &[f64; M]) -> [f64; M] {
    add::<M>(x, &neg::<M>(y))
}

/// `true` when every nonzero limb sits within ~2^60 of its predecessor
/// (normalization already caps it at ~2^-53 below), so the diagonal term
/// order produced by `mul` is roughly decreasing: the carried error terms
/// of one diagonal then have the magnitude of the next diagonal's
/// products. A limb far smaller than that (a gap in the expansion) breaks
/// the ordering. Zero limbs only occur at the tail and are harmless.
#[inline]
fn ulp_adjacent<const M: usize>(x: &[f64; M]) -> bool {
    const GAP: f64 = 1.0 / ((1u64 << 60) as f64);
    for i in 1..M {
        if x[i] != 0.0 && x[i].abs() < x[i - 1].abs() * GAP {
            return false;
        }
    }
    true
}

/// Truncated multiplication. Partial products with limb-index sum `s`
/// carry weight ~2^(-53s); everything at or below the last limb's weight is
/// folded in without error terms, everything beyond is dropped.
#[inline]
pub(crate) fn mul<const M: usize>(x: &[f64; M], y: &[f64; M]) -> [f64; M] {
    // The diagonal enumeration below is not symmetric in its operands, so
    // the last-limb rounding of x*y and y*x could differ. Ordering the
    // operands canonically makes multiplication commute bitwise.
    let (x, y) = {
        let key = |v: &[f64; M]| v.map(f64::to_bits);
        if key(x) <= key(y) {
            (x, y)
        } else {
            (y, x)
        }
    };
    // capacity: products for s < M (M(M+1)/2 pairs, 2 terms each) plus
    // M-1 plain products and up to M carried error terms for s == M.
    let mut terms = [0.0f64; 2 * 8 * 8];
    let mut n = 0usize;
    let mut prev_err = [0.0f64; 8];
    let mut prev_cnt = 0usize;
    for s in 0..M {
        let mut cur_err = [0.0f64; 8];
        let mut cur_cnt = 0usize;
        for i in 0..=s {
            let (p, e) = two_prod(x[i], y[s - i]);
            terms[n] = p;
            n += 1;
            cur_err[cur_cnt] = e;
            cur_cnt += 1;
        }
        for &e in &prev_err[..prev_cnt] {
            terms[n] = e;
            n += 1;
        }
        prev_err = cur_err;
        prev_cnt = cur_cnt;
    }
    // bucket s == M: error-free contributions only matter for the rounding
    // of the last limb.
    for i in 1..M {
        terms[n] = x[i] * y[M - i];
        n += 1;
    }
    for &e in &prev_err[..prev_cnt] {
        terms[n] = e;
        n += 1;
    }
    // The diagonal-by-diagonal order above is only decreasing when both
    // inputs have ulp-adjacent limbs; with gaps between limbs the carried
    // error terms land out of order, and the single-sweep renormalization
    // needs (roughly) decreasing magnitudes to extract faithfully.
    if !(ulp_adjacent(x) && ulp_adjacent(y)) {
        terms[..n].sort_unstable_by_key(|v| std::cmp::Reverse(v.abs().to_bits()));
    }
    renorm::<M>(&mut terms[..n])
}

#[inline]
pub(crate) fn from_f64<const M: usize>(v: f64) -> [f64; M] {
    let mut out = [0.0; M];
    out[0] = v;
    out
}

/// Exact scaling by a power of two (no renormalization needed as long as
/// no limb over- or underflows).
#[inline]
pub(crate) fn scale_pow2<const M: usize>(x: &[f64; M], s: f64) -> [f64; M] {
    debug_assert!(s != 0.0 && s.abs().log2().fract() == 0.0);
    let mut out = *x;
    for l in &mut out {
        *l *= s;
    }
    out
}

fn is_zero<const M: usize>(x: &[f64; M]) -> bool {
    x[0] == 0.0
}

/// Division via Newton–Raphson refinement of the hardware reciprocal.
/// The caller guarantees `y` is nonzero.
pub(crate) fn div<const M: usize>(x: &[f64; M], y: &[f64; M]) -> [f64; M] {
    if is_zero(x) {
        return [0.0; M];
    }
    let mut r = from_f64::<M>(1.0 / y[0]);
    let one = from_f64::<M>(1.0);
    let iters = M.trailing_zeros() + 1; // 2, 3, 4 for M = 2, 4, 8
    for _ in 0..iters {
        // r <- r + r (1 - y r)
        let t = sub::<M>(&one, &mul::<M>(y, &r));
        r = add::<M>(&r, &mul::<M>(&r, &t));
    }
    let q = mul::<M>(x, &r);
    // one correction step on the quotient itself
    let rem = sub::<M>(x, &mul::<M>(y, &q));
    add::<M>(&q, &mul::<M>(&rem, &r))
}

/// Square root via Newton–Raphson on the inverse square root.
/// The caller guarantees `x > 0`.
pub(crate) fn sqrt<const M: usize>(x: &[f64; M]) -> [f64; M] {
    let mut r = from_f64::<M>(1.0 / x[0].sqrt());
    let iters = M.trailing_zeros() + 1;
    let half = 0.5;
    for _ in 0..iters {
        // r <- r + r (1 - x r^2) / 2
        let rr = mul::<M>(&r, &r);
        let t = sub::<M>(&from_f64::<M>(1.0), &mul::<M>(x, &rr));
        r = add::<M>(&r, &scale_pow2::<M>(&mul::<M>(&r, &t), half));
    }
    let s = mul::<M>(x, &r);
    // s <- s + (x - s^2) * r / 2
    let rem = sub::<M>(x, &mul::<M>(&s, &s));
    add::<M>(&s, &mul::<M>(&rem, &scale_pow2::<M>(&r, half)))
}
