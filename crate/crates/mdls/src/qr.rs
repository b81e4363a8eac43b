//! Blocked Householder QR with WY aggregation.
//!
//! Columns of each width-n panel are reduced by Householder reflectors
//! P = I - beta v v^H (beta real, v_1 = 1); the panel's reflectors are
//! aggregated into P_WY = I + W Y^H, and the trailing matrix and Q are
//! updated with matrix products: Q := Q + Q W Y^H and C := C + Y W^H C.
//! Complex data replaces every transpose by the Hermitian transpose.
//!
//! The work is organized in nine ledger stages: beta_v, betaRTv, update_R
//! (per-column panel work), compute_W (the z recurrence), and the tile
//! products YWT, QWYT, YWTC with their additions Q_plus_QWY, R_plus_YWTC.

use crate::element::Element;
use crate::error::Error;
use crate::exec::{BlockCtx, Engine, LaunchSpec, WriteOp};
use crate::flop::OpCounts;
use crate::layout::StaggeredMatrix;
use crate::md::{MultiDouble, Precision};

/// The nine stage labels, in pipeline order.
pub const QR_STAGES: [&str; 9] = [
    "beta_v",
    "betaRTv",
    "update_R",
    "compute_W",
    "YWT",
    "QWYT",
    "YWTC",
    "Q_plus_QWY",
    "R_plus_YWTC",
];

/// Result of a blocked QR factorization: `A = Q R` with `Q` unitary M×M
/// and `R` upper trapezoidal M×K (exact zeros below the diagonal).
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: StaggeredMatrix,
    pub r: StaggeredMatrix,
}

/// Householder reflector of `x`: returns `(v, beta, alpha)` with `v[0] = 1`
/// such that `(I - beta v v^H) x = alpha e_1` and `alpha = -u ||x||` where
/// `u` is the unit direction of `x[0]` (`sign(0) = +1`). `x = 0` yields
/// `beta = 0`, `v = e_1` (the reflector degenerates to the identity).
///
/// Host-side reference used by tests and the unblocked comparison QR; the
/// panel kernels implement the same formulas under the launch model.
pub fn house<E: Element>(x: &[E]) -> (Vec<E>, MultiDouble, E) {
    assert!(!x.is_empty());
    let m = x[0].precision();
    let t = &mut OpCounts::default();
    let mut sigma = MultiDouble::zero(m);
    for xi in &x[1..] {
        sigma = sigma.add(&xi.norm_sq(t));
    }
    let h = x[0].modulus(t);
    let nrm = sigma.add(&h.mul(&h)).sqrt().expect("norms are nonnegative");
    let mut v = vec![E::zero(m); x.len()];
    v[0] = E::one(m);
    if nrm.is_zero() {
        return (v, MultiDouble::zero(m), E::zero(m));
    }
    let u = x[0].unit_dir(&h, t);
    let t1 = E::add(&x[0], &u.scale_re(&nrm, t), t);
    let beta = nrm.add(&h).div(&nrm).expect("nrm > 0");
    let one = E::one(m);
    let inv_t1 = E::div(&one, &t1, t).expect("t1 != 0 when nrm > 0");
    for (vi, xi) in v.iter_mut().zip(x).skip(1) {
        *vi = E::mul(xi, &inv_t1, t);
    }
    let alpha = u.scale_re(&nrm, t).neg();
    (v, beta, alpha)
}

fn elem_bytes(m: Precision, complex: bool) -> u64 {
    (m.limbs() * 8 * if complex { 2 } else { 1 }) as u64
}

fn apply_to<E: Element>(mat: &mut StaggeredMatrix, writes: &[WriteOp]) -> Result<(), Error> {
    for w in writes {
        let v = E::from_complex(&w.val);
        E::write(mat, w.i, w.j, &v)?;
    }
    Ok(())
}

/// Run `body_row` once per output row in `row0..row1`, split into blocks of
/// `threads` rows, and return the buffered writes.
pub(crate) fn rowwise<E, F>(
    eng: &mut Engine,
    stage: &'static str,
    m: Precision,
    bytes: u64,
    row0: usize,
    row1: usize,
    threads: usize,
    body_row: F,
) -> Result<Vec<WriteOp>, Error>
where
    E: Element,
    F: Fn(&mut BlockCtx, usize) + Sync,
{
    let len = row1 - row0;
    let spec = LaunchSpec {
        stage,
        blocks: len.div_ceil(threads),
        threads,
        precision: m,
        bytes,
    };
    eng.launch(&spec, |ctx| {
        for t in ctx.threads() {
            let i = row0 + ctx.block() * threads + t;
            if i < row1 {
                body_row(ctx, i);
            }
        }
    })
}

/// State of one panel: Householder vectors, their betas, and W.
struct Panel {
    /// M×n; column j holds v_j, zero above row kc + j, v_j[pivot] = 1.
    y: StaggeredMatrix,
    /// M×n aggregated W, zero above row kc.
    w: StaggeredMatrix,
    betas: Vec<MultiDouble>,
}

/// Reduce panel `k` (columns kc..kc+n) of R, filling Y and the betas and
/// applying each reflector to the remaining panel columns.
fn factor_panel<E: Element>(
    eng: &mut Engine,
    r: &mut StaggeredMatrix,
    kc: usize,
    n: usize,
) -> Result<Panel, Error> {
    let rows = r.rows();
    let m = r.precision();
    let eb = elem_bytes(m, E::COMPLEX);
    let mut y = StaggeredMatrix::zeros(rows, n, m, E::COMPLEX);
    let mut betas = Vec::with_capacity(n);
    for j in 0..n {
        let c = kc + j; // global column and pivot row
        let len = rows - c;
        // ---- stage beta_v: sigma, scalars, and the scaled vector v ----
        let mut partials: Vec<MultiDouble> = Vec::new();
        if len > n {
            // several blocks accumulate |x_i|^2 over row ranges, then a
            // one-block kernel reduces the partial sums
            let nb = (len - 1).div_ceil(n);
            let spec = LaunchSpec {
                stage: "beta_v",
                blocks: nb,
                threads: n,
                precision: m,
                bytes: (len as u64 + nb as u64) * eb,
            };
            let rr = &*r;
            let writes = eng.launch(&spec, |ctx| {
                let mut part: Vec<MultiDouble> = Vec::with_capacity(n);
                for t in ctx.threads() {
                    let i = c + 1 + ctx.block() * n + t;
                    part.push(if i < rows {
                        let x = E::read(rr, i, c);
                        ctx.norm_sq(&x)
                    } else {
                        MultiDouble::zero(m)
                    });
                }
                ctx.barrier();
                let s = ctx.reduce(&part);
                ctx.emit(0, ctx.block(), 0, &s);
            })?;
            partials = vec![MultiDouble::zero(m); nb];
            for w in &writes {
                partials[w.i] = MultiDouble::from_complex(&w.val);
            }
        }
        // scalar kernel: one block reduces sigma and derives beta, alpha,
        // and 1/t1 (single-block columns fold the sigma sum in here too)
        let rr = &*r;
        let parts = &partials;
        let spec = LaunchSpec {
            stage: "beta_v",
            blocks: 1,
            threads: if len > n { partials.len() } else { len },
            precision: m,
            bytes: (if len > n { partials.len() } else { len } as u64 + 3) * eb,
        };
        let writes = eng.launch(&spec, |ctx| {
            let sigma = if parts.is_empty() {
                let vals: Vec<MultiDouble> = ctx
                    .threads()
                    .map(|t| {
                        let i = c + t;
                        if t == 0 || i >= rows {
                            MultiDouble::zero(m)
                        } else {
                            let x = E::read(rr, i, c);
                            ctx.norm_sq(&x)
                        }
                    })
                    .collect();
                ctx.barrier();
                ctx.reduce(&vals)
            } else {
                let vals: Vec<MultiDouble> = ctx.threads().map(|t| parts[t]).collect();
                ctx.reduce(&vals)
            };
            let x1 = E::read(rr, c, c);
            let h = ctx.modulus(&x1);
            let h2 = ctx.mul_re(&h, &h);
            let nrm2 = ctx.add_re(&sigma, &h2);
            let nrm = ctx.sqrt_re(&nrm2).expect("sum of squares");
            if nrm.is_zero() {
                // x = 0: beta = 0, v = e_1, alpha = 0
                let z = E::zero(m);
                ctx.emit(0, 0, 0, &z);
                ctx.emit(0, 1, 0, &z);
                ctx.emit(0, 2, 0, &z);
                return;
            }
            let u = ctx.unit_dir(&x1, &h);
            let un = ctx.scale_re(&u, &nrm);
            let t1 = ctx.add(&x1, &un);
            let num = ctx.add_re(&nrm, &h);
            let beta = ctx.div_re(&num, &nrm).expect("nrm > 0");
            let one = E::one(m);
            let inv_t1 = ctx.div(&one, &t1).expect("t1 != 0");
            ctx.emit(0, 0, 0, &E::from_re(beta));
            ctx.emit(0, 1, 0, &inv_t1);
            ctx.emit(0, 2, 0, &un.neg()); // alpha
        })?;
        let mut beta = MultiDouble::zero(m);
        let mut inv_t1 = E::zero(m);
        let mut alpha = E::zero(m);
        for w in &writes {
            match w.i {
                0 => beta = w.val.re,
                1 => inv_t1 = E::from_complex(&w.val),
                _ => alpha = E::from_complex(&w.val),
            }
        }
        // scale v = x / t1 (pivot element forced to one)
        let rr = &*r;
        let writes = rowwise::<E, _>(
            eng,
            "beta_v",
            m,
            2 * len as u64 * eb,
            c,
            rows,
            n.min(len),
            |ctx, i| {
                if i == c {
                    ctx.emit(0, i, j, &E::one(m));
                } else {
                    let x = E::read(rr, i, c);
                    let v = ctx.mul(&x, &inv_t1);
                    ctx.emit(0, i, j, &v);
                }
            },
        )?;
        apply_to::<E>(&mut y, &writes)?;
        betas.push(beta);
        // ---- stage betaRTv: w_t = beta * sum_i conj(v_i) R[i][t] ----
        let trailing = kc + n - c - 1;
        let mut wvec = vec![E::zero(m); kc + n];
        if trailing > 0 {
            let spec = LaunchSpec {
                stage: "betaRTv",
                blocks: trailing,
                threads: n.min(len),
                precision: m,
                bytes: (trailing * (2 * len + 1)) as u64 * eb,
            };
            let yv = &y;
            let rr = &*r;
            let writes = eng.launch(&spec, |ctx| {
                let col = c + 1 + ctx.block();
                let nt = n.min(len);
                let mut part: Vec<E> = Vec::with_capacity(nt);
                for t in ctx.threads() {
                    let mut s = E::zero(m);
                    let mut i = c + t;
                    while i < rows {
                        let vi = E::read(yv, i, j);
                        let p = ctx.mul(&vi.conj(), &E::read(rr, i, col));
                        s = ctx.add(&s, &p);
                        i += nt;
                    }
                    part.push(s);
                }
                ctx.barrier();
                let total = ctx.reduce(&part);
                let w = ctx.scale_re(&total, &beta);
                ctx.emit(0, col, 0, &w);
            })?;
            for w in &writes {
                wvec[w.i] = E::from_complex(&w.val);
            }
        }
        // ---- stage update_R: rank-1 update of the trailing panel and the
        // explicit column result (alpha on the diagonal, zeros below) ----
        let yv = &y;
        let rr = &*r;
        let wv = &wvec;
        let writes = rowwise::<E, _>(
            eng,
            "update_R",
            m,
            ((trailing + 2) * len) as u64 * eb,
            c,
            rows,
            n.min(len),
            |ctx, i| {
                let vi = E::read(yv, i, j);
                for col in c + 1..kc + n {
                    let p = ctx.mul(&vi, &wv[col]);
                    let nv = ctx.sub(&E::read(rr, i, col), &p);
                    ctx.emit(0, i, col, &nv);
                }
                // column c is known exactly from the reflector
                if i == c {
                    ctx.emit(0, i, c, &alpha);
                } else {
                    ctx.emit(0, i, c, &E::zero(m));
                }
            },
        )?;
        apply_to::<E>(r, &writes)?;
    }
    let w = StaggeredMatrix::zeros(rows, n, m, E::COMPLEX);
    Ok(Panel { y, w, betas })
}

/// Fill W column by column: z_1 = -beta_1 v_1 and
/// z_j = -beta_j (v_j + W_{1..j-1} (Y^H_{1..j-1} v_j)).
fn compute_w<E: Element>(
    eng: &mut Engine,
    panel: &mut Panel,
    kc: usize,
    n: usize,
) -> Result<(), Error> {
    let rows = panel.y.rows();
    let m = panel.y.precision();
    let eb = elem_bytes(m, E::COMPLEX);
    let active = rows - kc;
    for j in 0..n {
        let beta = panel.betas[j];
        let mut yv = vec![E::zero(m); j];
        if j > 0 {
            // y_l = sum_i conj(Y[i][l]) Y[i][j]; both columns vanish above
            // row kc + j, so the dot starts there
            let spec = LaunchSpec {
                stage: "compute_W",
                blocks: j,
                threads: n.min(rows - kc - j),
                precision: m,
                bytes: (j * 2 * (rows - kc - j) + j) as u64 * eb,
            };
            let y = &panel.y;
            let writes = eng.launch(&spec, |ctx| {
                let l = ctx.block();
                let nt = n.min(rows - kc - j);
                let mut part: Vec<E> = Vec::with_capacity(nt);
                for t in ctx.threads() {
                    let mut s = E::zero(m);
                    let mut i = kc + j + t;
                    while i < rows {
                        let a = E::read(y, i, l).conj();
                        let p = ctx.mul(&a, &E::read(y, i, j));
                        s = ctx.add(&s, &p);
                        i += nt;
                    }
                    part.push(s);
                }
                ctx.barrier();
                let total = ctx.reduce(&part);
                ctx.emit(0, l, 0, &total);
            })?;
            for w in &writes {
                yv[w.i] = E::from_complex(&w.val);
            }
        }
        // z_i = -beta (v_i + sum_l W[i][l] y_l) over the active rows
        let y = &panel.y;
        let w = &panel.w;
        let yvr = &yv;
        let writes = rowwise::<E, _>(
            eng,
            "compute_W",
            m,
            ((j + 2) * active) as u64 * eb,
            kc,
            rows,
            n.min(active),
            |ctx, i| {
                let mut s = E::read(y, i, j);
                for (l, yl) in yvr.iter().enumerate() {
                    let p = ctx.mul(&E::read(w, i, l), yl);
                    s = ctx.add(&s, &p);
                }
                let z = ctx.scale_re(&s, &beta).neg();
                ctx.emit(0, i, j, &z);
            },
        )?;
        apply_to::<E>(&mut panel.w, &writes)?;
    }
    Ok(())
}

/// Blocked Householder QR of an M×(N·n) matrix with M >= N·n.
/// Ledger stages are exactly the nine labels in [`QR_STAGES`].
pub fn blocked_qr<E: Element>(
    eng: &mut Engine,
    a: &StaggeredMatrix,
    n_tiles: usize,
    tile_size: usize,
) -> Result<QrFactors, Error> {
    let (rows, cols) = (a.rows(), a.cols());
    let m = a.precision();
    if n_tiles == 0 || tile_size == 0 || cols != n_tiles * tile_size {
        return Err(Error::ShapeMismatch(format!(
            "{cols} columns cannot be cut into {n_tiles} tiles of width {tile_size}"
        )));
    }
    if rows < cols {
        return Err(Error::ShapeMismatch(format!(
            "need rows >= cols for QR, got {rows}x{cols}"
        )));
    }
    if a.is_complex() != E::COMPLEX {
        return Err(Error::ShapeMismatch(
            "element flavor does not match the matrix".to_string(),
        ));
    }
    let n = tile_size;
    let eb = elem_bytes(m, E::COMPLEX);
    let mut q = StaggeredMatrix::identity(rows, m, E::COMPLEX);
    let mut r = a.clone();
    for k in 0..n_tiles {
        let kc = k * n;
        let act = rows - kc; // rows the tile's reflectors touch
        let mut panel = factor_panel::<E>(eng, &mut r, kc, n)?;
        compute_w::<E>(eng, &mut panel, kc, n)?;
        // ---- YWT[i][l_out] = sum_l Y[i][l] conj(W[l_out][l]) ----
        // Y[i][l] vanishes above row kc + l, so the inner sum is trapezoidal.
        let mut ywt = StaggeredMatrix::zeros(rows, rows, m, E::COMPLEX);
        {
            let y = &panel.y;
            let w = &panel.w;
            let writes = rowwise::<E, _>(
                eng,
                "YWT",
                m,
                (act as u64 * act as u64 + 2 * act as u64 * n as u64) * eb,
                kc,
                rows,
                n,
                |ctx, i| {
                    let lmax = n.min(i - kc + 1);
                    for jo in kc..rows {
                        let mut s = E::zero(m);
                        for l in 0..lmax {
                            let b = E::read(w, jo, l).conj();
                            let p = ctx.mul(&E::read(y, i, l), &b);
                            s = ctx.add(&s, &p);
                        }
                        ctx.emit(0, i, jo, &s);
                    }
                },
            )?;
            apply_to::<E>(&mut ywt, &writes)?;
        }
        // ---- QWYT[i][j] = sum_l Q[i][l] (W Y^H)[l][j] = sum_l Q[i][l] conj(YWT[j][l]) ----
        let mut qwyt = StaggeredMatrix::zeros(rows, rows, m, E::COMPLEX);
        {
            let qm = &q;
            let ywtm = &ywt;
            let writes = rowwise::<E, _>(
                eng,
                "QWYT",
                m,
                (2 * rows as u64 * act as u64 + act as u64 * act as u64) * eb,
                0,
                rows,
                n,
                |ctx, i| {
                    for jo in kc..rows {
                        let mut s = E::zero(m);
                        for l in kc..rows {
                            let b = E::read(ywtm, jo, l).conj();
                            let p = ctx.mul(&E::read(qm, i, l), &b);
                            s = ctx.add(&s, &p);
                        }
                        ctx.emit(0, i, jo, &s);
                    }
                },
            )?;
            apply_to::<E>(&mut qwyt, &writes)?;
        }
        // ---- YWTC[i][j] = sum_l YWT[i][l] R[l][j]; trailing columns only,
        // computed from R before the addition stages, skipped at the last
        // tile ----
        let c0 = kc + n;
        let tcols = cols - c0;
        let mut ywtc = StaggeredMatrix::zeros(rows, cols.max(1), m, E::COMPLEX);
        if k + 1 < n_tiles {
            let ywtm = &ywt;
            let rm = &r;
            let writes = rowwise::<E, _>(
                eng,
                "YWTC",
                m,
                (act as u64 * act as u64 + 2 * act as u64 * tcols as u64) * eb,
                kc,
                rows,
                n,
                |ctx, i| {
                    for jo in c0..cols {
                        let mut s = E::zero(m);
                        for l in kc..rows {
                            let p = ctx.mul(&E::read(ywtm, i, l), &E::read(rm, l, jo));
                            s = ctx.add(&s, &p);
                        }
                        ctx.emit(0, i, jo, &s);
                    }
                },
            )?;
            apply_to::<E>(&mut ywtc, &writes)?;
        }
        // ---- Q := Q + QWYT (columns >= kc are the only ones touched) ----
        {
            let qm = &q;
            let qwytm = &qwyt;
            let writes = rowwise::<E, _>(
                eng,
                "Q_plus_QWY",
                m,
                3 * rows as u64 * act as u64 * eb,
                0,
                rows,
                n,
                |ctx, i| {
                    for jo in kc..rows {
                        let s = ctx.add(&E::read(qm, i, jo), &E::read(qwytm, i, jo));
                        ctx.emit(0, i, jo, &s);
                    }
                },
            )?;
            apply_to::<E>(&mut q, &writes)?;
        }
        // ---- R := R + YWTC over the trailing columns (skipped at the
        // last tile) ----
        if k + 1 < n_tiles {
            let rm = &r;
            let ywtcm = &ywtc;
            let writes = rowwise::<E, _>(
                eng,
                "R_plus_YWTC",
                m,
                3 * act as u64 * tcols as u64 * eb,
                kc,
                rows,
                n,
                |ctx, i| {
                    for jo in c0..cols {
                        let s = ctx.add(&E::read(rm, i, jo), &E::read(ywtcm, i, jo));
                        ctx.emit(0, i, jo, &s);
                    }
                },
            )?;
            apply_to::<E>(&mut r, &writes)?;
        }
    }
    Ok(QrFactors { q, r })
}

/// Plain column-by-column Householder QR at the same precision, outside
/// the launch model; reference for equivalence tests on small matrices.
pub fn unblocked_qr<E: Element>(a: &StaggeredMatrix) -> Result<QrFactors, Error> {
    let (rows, cols) = (a.rows(), a.cols());
    let m = a.precision();
    if rows < cols {
        return Err(Error::ShapeMismatch("need rows >= cols".to_string()));
    }
    let t = &mut OpCounts::default();
    let mut q = StaggeredMatrix::identity(rows, m, E::COMPLEX);
    let mut r = a.clone();
    for c in 0..cols {
        let x: Vec<E> = (c..rows).map(|i| E::read(&r, i, c)).collect();
        let (v, beta, alpha) = house::<E>(&x);
        if !beta.is_zero() {
            // R := P R on trailing columns
            for col in c + 1..cols {
                let mut s = E::zero(m);
                for (off, vi) in v.iter().enumerate() {
                    let p = E::mul(&vi.conj(), &E::read(&r, c + off, col), t);
                    s = E::add(&s, &p, t);
                }
                let w = s.scale_re(&beta, t);
                for (off, vi) in v.iter().enumerate() {
                    let p = E::mul(vi, &w, t);
                    let nv = E::sub(&E::read(&r, c + off, col), &p, t);
                    E::write(&mut r, c + off, col, &nv)?;
                }
            }
            // Q := Q P
            for i in 0..rows {
                let mut s = E::zero(m);
                for (off, vi) in v.iter().enumerate() {
                    let p = E::mul(&E::read(&q, i, c + off), vi, t);
                    s = E::add(&s, &p, t);
                }
                let w = s.scale_re(&beta, t);
                for (off, vi) in v.iter().enumerate() {
                    let p = E::mul(&w, &vi.conj(), t);
                    let nv = E::sub(&E::read(&q, i, c + off), &p, t);
                    E::write(&mut q, i, c + off, &nv)?;
                }
            }
        }
        E::write(&mut r, c, c, &alpha)?;
        let z = E::zero(m);
        for i in c + 1..rows {
            E::write(&mut r, i, c, &z)?;
        }
    }
    Ok(QrFactors { q, r })
}
