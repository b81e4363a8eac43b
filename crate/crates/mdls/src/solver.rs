//! Least squares facade: A = QR, form Q^H b, back-substitute on the
//! leading K×K block of R, and report residual norms.
//!
//! The QR factorization and the back substitution run on separate engines
//! so their ledgers stay disjoint and their kernel/wall times can be
//! reported side by side. Forming Q^H b is one extra launch, ledgered
//! under the QR engine as stage `qtb`.

use crate::backsub::{tiled_back_sub, TiledUpperTriangular};
use crate::element::Element;
use crate::error::Error;
use crate::exec::{Backend, Engine, LaunchRecord};
use crate::flop::{FlopLedger, OpCounts};
use crate::layout::{StaggeredMatrix, StaggeredVector};
use crate::md::{format_decimal, MultiDouble};
use crate::qr::{blocked_qr, rowwise};
use std::time::Instant;

/// Ledger stage label of the Q^H b product.
pub const STAGE_QTB: &str = "qtb";

/// Everything a solve produces: the solution, both ledgers and traces,
/// kernel and wall times, and the residual norms.
#[derive(Debug, Clone)]
pub struct LstsqResult {
    pub x: StaggeredVector,
    pub qr_ledger: FlopLedger,
    pub bs_ledger: FlopLedger,
    pub qr_trace: Vec<LaunchRecord>,
    pub bs_trace: Vec<LaunchRecord>,
    pub qr_kernel_ms: f64,
    pub qr_wall_ms: f64,
    pub bs_kernel_ms: f64,
    pub bs_wall_ms: f64,
    /// ||b - A x||_2 at working precision.
    pub residual_abs: MultiDouble,
    /// Absolute residual divided by ||b||_2 (or the absolute value when
    /// b = 0).
    pub residual_rel: MultiDouble,
    /// ||tail of Q^H b||_2 for overdetermined systems: the residual norm
    /// the factorization predicts, cross-checkable against residual_abs.
    pub qtb_tail_norm: Option<MultiDouble>,
}

impl LstsqResult {
    pub fn qr_flops(&self) -> u64 {
        self.qr_ledger.total_flops()
    }

    pub fn bs_flops(&self) -> u64 {
        self.bs_ledger.total_flops()
    }

    /// One-row summary with a fixed schema across modes.
    pub fn summary_csv(&self) -> String {
        format!(
            "qr_kernel_ms,qr_wall_ms,bs_kernel_ms,bs_wall_ms,qr_flops,bs_flops,total_flops,residual\n\
             {:.3},{:.3},{:.3},{:.3},{},{},{},{}\n",
            self.qr_kernel_ms,
            self.qr_wall_ms,
            self.bs_kernel_ms,
            self.bs_wall_ms,
            self.qr_flops(),
            self.bs_flops(),
            self.qr_flops() + self.bs_flops(),
            format_decimal(&self.residual_rel, 8),
        )
    }
}

/// Euclidean norm of a staggered vector at working precision (uncounted).
fn vec_norm<E: Element>(v: &StaggeredVector) -> MultiDouble {
    let m = v.precision();
    let t = &mut OpCounts::default();
    let mut s = MultiDouble::zero(m);
    for i in 0..v.len() {
        s = s.add(&E::read_vec(v, i).norm_sq(t));
    }
    s.sqrt().expect("sum of squares")
}

/// `(||b - A x||_2, relative form)` at the working precision, host-side.
pub fn residual_norms<E: Element>(
    a: &StaggeredMatrix,
    x: &StaggeredVector,
    b: &StaggeredVector,
) -> Result<(MultiDouble, MultiDouble), Error> {
    if b.len() != a.rows() || x.len() != a.cols() {
        return Err(Error::ShapeMismatch(format!(
            "residual of {}x{} system against x[{}], b[{}]",
            a.rows(),
            a.cols(),
            x.len(),
            b.len()
        )));
    }
    let m = a.precision();
    let t = &mut OpCounts::default();
    let mut sum = MultiDouble::zero(m);
    for i in 0..a.rows() {
        let mut ax = E::zero(m);
        for j in 0..a.cols() {
            let p = E::mul(&E::read(a, i, j), &E::read_vec(x, j), t);
            ax = E::add(&ax, &p, t);
        }
        let r = E::sub(&E::read_vec(b, i), &ax, t);
        sum = sum.add(&r.norm_sq(t));
    }
    let abs = sum.sqrt().expect("sum of squares");
    let bn = vec_norm::<E>(b);
    let rel = if bn.is_zero() { abs } else { abs.div(&bn)? };
    Ok((abs, rel))
}

/// Solve `min ||b - A x||_2` for an M×K matrix with K = n_tiles·tile_size
/// and M >= K, via blocked QR and tiled back substitution.
pub fn lstsq_solve<E: Element>(
    a: &StaggeredMatrix,
    b: &StaggeredVector,
    n_tiles: usize,
    tile_size: usize,
    backend: Backend,
) -> Result<LstsqResult, Error> {
    let (rows, cols) = (a.rows(), a.cols());
    let m = a.precision();
    if b.len() != rows {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side length {} does not match {} rows",
            b.len(),
            rows
        )));
    }
    if b.precision() != m || b.is_complex() != a.is_complex() {
        return Err(Error::ShapeMismatch(
            "matrix and right-hand side disagree in precision or flavor".to_string(),
        ));
    }
    // ---- QR phase (factorization + Q^H b) ----
    let qr_start = Instant::now();
    let mut qr_eng = Engine::new(backend);
    let f = blocked_qr::<E>(&mut qr_eng, a, n_tiles, tile_size)?;
    let mut qtb = StaggeredVector::zeros(rows, m, E::COMPLEX);
    {
        let q = &f.q;
        let eb = (m.limbs() * 8 * if E::COMPLEX { 2 } else { 1 }) as u64;
        let writes = rowwise::<E, _>(
            &mut qr_eng,
            STAGE_QTB,
            m,
            (rows as u64 * rows as u64 + 2 * rows as u64) * eb,
            0,
            rows,
            tile_size,
            |ctx, i| {
                // (Q^H b)_i = sum_l conj(Q[l][i]) b_l
                let mut s = E::zero(m);
                for l in 0..rows {
                    let p = ctx.mul(&E::read(q, l, i).conj(), &E::read_vec(b, l));
                    s = ctx.add(&s, &p);
                }
                ctx.emit(0, i, 0, &s);
            },
        )?;
        for w in &writes {
            let v = E::from_complex(&w.val);
            E::write_vec(&mut qtb, w.i, &v)?;
        }
    }
    let qr_wall_ms = qr_start.elapsed().as_secs_f64() * 1e3;
    let qr_kernel_ms = qr_eng.kernel_time_ms();
    // ---- back substitution phase on the leading K×K of R ----
    let bs_start = Instant::now();
    let mut bs_eng = Engine::new(backend);
    let mut rk = StaggeredMatrix::zeros(cols, cols, m, E::COMPLEX);
    for i in 0..cols {
        for j in i..cols {
            let v = E::read(&f.r, i, j);
            E::write(&mut rk, i, j, &v)?;
        }
    }
    let mut tu = TiledUpperTriangular::new(rk, n_tiles)?;
    let mut rhs = StaggeredVector::zeros(cols, m, E::COMPLEX);
    for i in 0..cols {
        let v = E::read_vec(&qtb, i);
        E::write_vec(&mut rhs, i, &v)?;
    }
    let x = tiled_back_sub::<E>(&mut bs_eng, &mut tu, &rhs)?;
    let bs_wall_ms = bs_start.elapsed().as_secs_f64() * 1e3;
    let bs_kernel_ms = bs_eng.kernel_time_ms();
    // ---- residuals (host-side, working precision) ----
    let (residual_abs, residual_rel) = residual_norms::<E>(a, &x, b)?;
    let qtb_tail_norm = (rows > cols).then(|| {
        let t = &mut OpCounts::default();
        let mut s = MultiDouble::zero(m);
        for i in cols..rows {
            s = s.add(&E::read_vec(&qtb, i).norm_sq(t));
        }
        s.sqrt().expect("sum of squares")
    });
    Ok(LstsqResult {
        x,
        qr_trace: qr_eng.records().to_vec(),
        bs_trace: bs_eng.records().to_vec(),
        qr_ledger: qr_eng.take_ledger(),
        bs_ledger: bs_eng.take_ledger(),
        qr_kernel_ms,
        qr_wall_ms,
        bs_kernel_ms,
        bs_wall_ms,
        residual_abs,
        residual_rel,
        qtb_tail_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{random_matrix, random_vector};
    use crate::md::{ComplexMultiDouble, Precision};
    use crate::oracle::{exact_lstsq_small, DyadicRational};

    #[test]
    fn identity_system_returns_rhs() {
        let m = Precision::Qd;
        let a = StaggeredMatrix::identity(8, m, false);
        let b = random_vector(8, m, 3, false);
        let r = lstsq_solve::<MultiDouble>(&a, &b, 2, 4, Backend::Serial).unwrap();
        for i in 0..8 {
            assert!(r.x.get(i).unwrap().bits_eq(&b.get(i).unwrap()), "component {i}");
        }
        assert!(r.residual_abs.to_f64() <= 1e-60);
    }

    #[test]
    fn column_of_ones_matches_oracle() {
        // A = [[1],[1]], b = (0, 2): least squares solution is exactly 1
        let m = Precision::Dd;
        let mut a = StaggeredMatrix::zeros(2, 1, m, false);
        a.set(0, 0, &MultiDouble::one(m)).unwrap();
        a.set(1, 0, &MultiDouble::one(m)).unwrap();
        let mut b = StaggeredVector::zeros(2, m, false);
        b.set(1, &MultiDouble::from_f64(m, 2.0)).unwrap();
        let r = lstsq_solve::<MultiDouble>(&a, &b, 1, 1, Backend::Serial).unwrap();
        let d = DyadicRational::from_f64;
        let sol = exact_lstsq_small(&[vec![d(1.0)], vec![d(1.0)]], &[d(0.0), d(2.0)]).unwrap();
        let got = DyadicRational::from_md(&r.x.get(0).unwrap());
        assert!(sol.within(0, &got, &d(1e-30)));
        // residual is sqrt(2): b - (1,1) = (-1, 1)
        assert!((r.residual_abs.to_f64() - 2f64.sqrt()).abs() < 1e-25);
        // the trailing Q^H b component predicts the same residual
        let tail = r.qtb_tail_norm.unwrap();
        assert!((tail.to_f64() - r.residual_abs.to_f64()).abs() < 1e-25);
    }

    #[test]
    fn projection_removes_nothing() {
        // A = [[1],[0]], b = (0,1): x = 0, absolute residual 1
        let m = Precision::Dd;
        let mut a = StaggeredMatrix::zeros(2, 1, m, false);
        a.set(0, 0, &MultiDouble::one(m)).unwrap();
        let mut b = StaggeredVector::zeros(2, m, false);
        b.set(1, &MultiDouble::one(m)).unwrap();
        let r = lstsq_solve::<MultiDouble>(&a, &b, 1, 1, Backend::Serial).unwrap();
        assert!(r.x.get(0).unwrap().abs().to_f64() <= 1e-30);
        assert!((r.residual_abs.to_f64() - 1.0).abs() <= 1e-30);
    }

    #[test]
    fn square_random_dd_residual() {
        let m = Precision::Dd;
        let a = random_matrix(64, 64, m, 11, false);
        let b = random_vector(64, m, 12, false);
        let r = lstsq_solve::<MultiDouble>(&a, &b, 2, 32, Backend::Serial).unwrap();
        assert!(r.residual_rel.to_f64() <= 1e-28, "rel = {}", r.residual_rel.to_f64());
    }

    #[test]
    fn complex_random_solve() {
        let m = Precision::Dd;
        let a = random_matrix(16, 16, m, 13, true);
        let b = random_vector(16, m, 14, true);
        let r = lstsq_solve::<ComplexMultiDouble>(&a, &b, 2, 8, Backend::Serial).unwrap();
        assert!(r.residual_rel.to_f64() <= 1e-28);
    }

    #[test]
    fn ledgers_are_disjoint_and_additive() {
        let m = Precision::Dd;
        let a = random_matrix(16, 16, m, 15, false);
        let b = random_vector(16, m, 16, false);
        let r = lstsq_solve::<MultiDouble>(&a, &b, 2, 8, Backend::Serial).unwrap();
        let qr_stages: Vec<&str> = r.qr_ledger.stages().map(|(s, _)| s).collect();
        let bs_stages: Vec<&str> = r.bs_ledger.stages().map(|(s, _)| s).collect();
        assert!(qr_stages.contains(&STAGE_QTB));
        for s in &bs_stages {
            assert!(!qr_stages.contains(s), "stage {s} in both ledgers");
        }
        assert!(r.qr_flops() > 0 && r.bs_flops() > 0);
        assert!(r.bs_flops() < r.qr_flops());
        let csv = r.summary_csv();
        assert!(csv.starts_with("qr_kernel_ms,"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn shape_errors() {
        let m = Precision::Dd;
        let a = random_matrix(8, 8, m, 1, false);
        let b = random_vector(6, m, 2, false);
        assert!(lstsq_solve::<MultiDouble>(&a, &b, 2, 4, Backend::Serial).is_err());
        let bc = random_vector(8, m, 2, true);
        assert!(lstsq_solve::<MultiDouble>(&a, &bc, 2, 4, Backend::Serial).is_err());
    }

    #[test]
    fn overdetermined_optimality_against_oracle() {
        // 8x4 integer-valued system: the computed solution must match the
        // exact normal-equations solution to double-double level
        let m = Precision::Dd;
        let mut a = StaggeredMatrix::zeros(8, 4, m, false);
        let mut b = StaggeredVector::zeros(8, m, false);
        let mut da = Vec::new();
        let mut db = Vec::new();
        let d = DyadicRational::from_f64;
        for i in 0..8 {
            let mut row = Vec::new();
            for j in 0..4 {
                let v = ((i * 7 + j * 3) % 11) as f64 - 5.0;
                a.set(i, j, &MultiDouble::from_f64(m, v)).unwrap();
                row.push(d(v));
            }
            let bv = ((i * 5 + 2) % 13) as f64 - 6.0;
            b.set(i, &MultiDouble::from_f64(m, bv)).unwrap();
            da.push(row);
            db.push(d(bv));
        }
        let r = lstsq_solve::<MultiDouble>(&a, &b, 2, 2, Backend::Serial).unwrap();
        let sol = exact_lstsq_small(&da, &db).unwrap();
        for j in 0..4 {
            let got = DyadicRational::from_md(&r.x.get(j).unwrap());
            assert!(sol.within(j, &got, &d(1e-26)), "component {j}");
        }
    }
}
