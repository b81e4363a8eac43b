//! Acceptance gate: one test per criterion (criterion 3 is split by
//! precision and flavor so progress is visible). Each test name carries
//! its criterion number; `cargo test --test acceptance` prints one
//! pass/fail line per criterion.
//!
//! Runtime note: criteria 3, 4 and 8 factor dense matrices up to
//! dimension 1024 at up to octo double precision on the host CPU; the
//! whole suite takes on the order of an hour on a single core.

use mdls::backsub::{tiled_back_sub, TiledUpperTriangular};
use mdls::element::Element;
use mdls::exec::{Backend, Engine, LaunchSpec};
use mdls::flop::{average_overhead, op_cost, OpCounts, OpKind};
use mdls::layout::{random_matrix, random_upper_triangular, random_vector, StaggeredMatrix};
use mdls::md::{two_prod, two_sum, ComplexMultiDouble, MultiDouble, Precision};
use mdls::oracle::{exact_lstsq_small, DyadicRational};
use mdls::qr::blocked_qr;
use mdls::solver::lstsq_solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_table1_fidelity() {
    use OpKind::*;
    use Precision::*;
    for (m, add, mul, div) in [(Dd, 20, 23, 70), (Qd, 89, 336, 893), (Od, 269, 1742, 5126)] {
        assert_eq!(op_cost(m, Add), add);
        assert_eq!(op_cost(m, Mul), mul);
        assert_eq!(op_cost(m, Div), div);
    }
    for (m, avg) in [(Dd, 37.7), (Qd, 439.3), (Od, 2379.0)] {
        assert!((average_overhead(m) - avg).abs() <= 0.05, "{m:?}: {}", average_overhead(m));
    }
    println!("criterion 1 PASS: operation cost table and averages match");
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_2_launch_count_law() {
    let m = Precision::Dd;
    let n = 4;
    for nt in 1..=16usize {
        let u = random_upper_triangular(nt * n, m, nt as u64, false).unwrap();
        let b = random_vector(nt * n, m, 100 + nt as u64, false);
        let mut eng = Engine::new(Backend::Serial);
        let mut tu = TiledUpperTriangular::new(u, nt).unwrap();
        tiled_back_sub::<MultiDouble>(&mut eng, &mut tu, &b).unwrap();
        let expect = 1 + nt * (nt + 1) / 2;
        assert_eq!(eng.records().len(), expect, "N = {nt}");
    }
    println!("criterion 2 PASS: back substitution issues 1 + N(N+1)/2 launches for N in 1..=16");
}

// ---------------------------------------------------------------- 3

fn residual_sweep<E: Element>(m: Precision, bound: f64) {
    let (rows, nt, n) = (256usize, 4usize, 64usize);
    for seed in 1..=20u64 {
        let a = random_matrix(rows, rows, m, seed, E::COMPLEX);
        let b = random_vector(rows, m, 1000 + seed, E::COMPLEX);
        let r = lstsq_solve::<E>(&a, &b, nt, n, Backend::Serial).unwrap();
        let rel = r.residual_rel.to_f64();
        assert!(rel <= bound, "seed {seed}: relative residual {rel:e} > {bound:e}");
    }
}

#[test]
fn criterion_3a_residual_dd_real() {
    residual_sweep::<MultiDouble>(Precision::Dd, 1e-28);
    println!("criterion 3 (dd real) PASS: 20 seeds at dim 256, relative residual <= 1e-28");
}

#[test]
fn criterion_3b_residual_dd_complex() {
    residual_sweep::<ComplexMultiDouble>(Precision::Dd, 1e-28);
    println!("criterion 3 (dd complex) PASS: 20 seeds at dim 256, relative residual <= 1e-28");
}

#[test]
fn criterion_3c_residual_qd_real() {
    residual_sweep::<MultiDouble>(Precision::Qd, 1e-58);
    println!("criterion 3 (qd real) PASS: 20 seeds at dim 256, relative residual <= 1e-58");
}

#[test]
fn criterion_3d_residual_qd_complex() {
    residual_sweep::<ComplexMultiDouble>(Precision::Qd, 1e-58);
    println!("criterion 3 (qd complex) PASS: 20 seeds at dim 256, relative residual <= 1e-58");
}

#[test]
fn criterion_3e_residual_od_real() {
    residual_sweep::<MultiDouble>(Precision::Od, 1e-118);
    println!("criterion 3 (od real) PASS: 20 seeds at dim 256, relative residual <= 1e-118");
}

#[test]
fn criterion_3f_residual_od_complex() {
    residual_sweep::<ComplexMultiDouble>(Precision::Od, 1e-118);
    println!("criterion 3 (od complex) PASS: 20 seeds at dim 256, relative residual <= 1e-118");
}

// ---------------------------------------------------------------- 4

/// `(||Q^H Q - I||_max, ||QR - A||_max / ||A||_max)` at working precision.
fn qr_quality(a: &StaggeredMatrix, q: &StaggeredMatrix, r: &StaggeredMatrix) -> (f64, f64) {
    let m = a.precision();
    let t = &mut OpCounts::default();
    let dim = a.rows();
    let mut orth: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let mut s = MultiDouble::zero(m);
            for l in 0..dim {
                let p =
                    <MultiDouble as Element>::mul(&q.get(l, i).unwrap(), &q.get(l, j).unwrap(), t);
                s = s.add(&p);
            }
            let err = if i == j { s.sub(&MultiDouble::one(m)).abs() } else { s.abs() };
            orth = orth.max(err.to_f64());
        }
    }
    let mut rec: f64 = 0.0;
    let mut amax: f64 = 0.0;
    for i in 0..dim {
        for j in 0..a.cols() {
            let mut s = MultiDouble::zero(m);
            for l in 0..=j {
                let p =
                    <MultiDouble as Element>::mul(&q.get(i, l).unwrap(), &r.get(l, j).unwrap(), t);
                s = s.add(&p);
            }
            rec = rec.max(s.sub(&a.get(i, j).unwrap()).abs().to_f64());
            amax = amax.max(a.get(i, j).unwrap().abs().to_f64());
        }
    }
    (orth, rec / amax)
}

#[test]
fn criterion_4_orthogonality_and_reconstruction() {
    for m in [Precision::Dd, Precision::Qd, Precision::Od] {
        let bound = 256.0 * (2f64).powi(-53 * m.limbs() as i32 + 3);
        for dim in [32usize, 64, 128, 256] {
            let a = random_matrix(dim, dim, m, dim as u64, false);
            let mut eng = Engine::new(Backend::Serial);
            let f = blocked_qr::<MultiDouble>(&mut eng, &a, 4, dim / 4).unwrap();
            let (orth, rec) = qr_quality(&a, &f.q, &f.r);
            assert!(orth <= bound, "{m:?} dim {dim}: orthogonality {orth:e} > {bound:e}");
            assert!(rec <= bound, "{m:?} dim {dim}: reconstruction {rec:e} > {bound:e}");
        }
    }
    println!(
        "criterion 4 PASS: orthogonality and reconstruction within 256*2^(-53m+3) \
         at dims 32..256 for m in {{2,4,8}}"
    );
}

// ---------------------------------------------------------------- 5

fn random_exponent_f64(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-1.0..=1.0f64) * (2f64).powi(rng.gen_range(-30..30))
}

/// Random value at precision `m`; half the draws carry irregular gaps
/// between limbs, the shape that cancellation-heavy code produces and
/// that renormalization shortcuts tend to mishandle.
fn random_staggered(rng: &mut ChaCha8Rng, m: Precision) -> MultiDouble {
    let gappy = rng.gen_bool(0.5);
    let mut limbs = Vec::with_capacity(m.limbs());
    let mut scale = 0i32;
    for _ in 0..m.limbs() {
        limbs.push(rng.gen_range(-1.0..=1.0f64) * (2f64).powi(scale));
        scale -= 53 + if gappy { rng.gen_range(0..30) } else { 0 };
    }
    MultiDouble::renormalize(&limbs, m).unwrap()
}

#[test]
fn criterion_5_oracle_equivalence() {
    // (a) error-free transform identities, exactly, on 1e5 pairs
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100_000 {
        let a = random_exponent_f64(&mut rng);
        let b = random_exponent_f64(&mut rng);
        let (s, e) = two_sum(a, b);
        let lhs = DyadicRational::from_f64(s).add(&DyadicRational::from_f64(e));
        let rhs = DyadicRational::from_f64(a).add(&DyadicRational::from_f64(b));
        assert_eq!(lhs.cmp(&rhs), std::cmp::Ordering::Equal, "two_sum({a}, {b})");
        let (p, e) = two_prod(a, b);
        let lhs = DyadicRational::from_f64(p).add(&DyadicRational::from_f64(e));
        let rhs = DyadicRational::from_f64(a).mul(&DyadicRational::from_f64(b));
        assert_eq!(lhs.cmp(&rhs), std::cmp::Ordering::Equal, "two_prod({a}, {b})");
    }
    // (b) md add/mul/div relative error vs exact <= 2^(-53m+6) on 1e4 pairs
    for m in [Precision::Dd, Precision::Qd, Precision::Od] {
        let tol = DyadicRational::from_int(1).scale_pow2(-53 * m.limbs() as i64 + 6);
        for _ in 0..10_000 {
            let a = random_staggered(&mut rng, m);
            let b = random_staggered(&mut rng, m);
            let (da, db) = (DyadicRational::from_md(&a), DyadicRational::from_md(&b));
            // |fl(a op b) - (a op b)| <= tol |a op b|
            let check = |got: &MultiDouble, exact: &DyadicRational| {
                let err = DyadicRational::from_md(got).sub(exact).abs();
                assert!(
                    err.cmp_abs(&tol.mul(&exact.abs())) != std::cmp::Ordering::Greater,
                    "{m:?}: relative error above 2^(-53m+6)"
                );
            };
            check(&a.add(&b), &da.add(&db));
            check(&a.mul(&b), &da.mul(&db));
            if !b.is_zero() {
                // a/b is not dyadic; multiply through by b:
                // |q - a/b| <= tol |a/b|  <=>  |q b - a| <= tol |a|
                let q = DyadicRational::from_md(&a.div(&b).unwrap());
                let err = q.mul(&db).sub(&da).abs();
                assert!(
                    err.cmp_abs(&tol.mul(&da.abs())) != std::cmp::Ordering::Greater,
                    "{m:?}: division relative error above 2^(-53m+6)"
                );
            }
        }
    }
    // (c) 8x4 integer least squares vs exact normal equations
    for (m, tol) in [(Precision::Dd, 1e-26), (Precision::Qd, 1e-56)] {
        let (rows, cols) = (8usize, 4usize);
        let mut a = StaggeredMatrix::zeros(rows, cols, m, false);
        let mut b = random_vector(rows, m, 0, false); // overwritten below
        let mut ai = vec![vec![DyadicRational::zero(); cols]; rows];
        let mut bi = vec![DyadicRational::zero(); rows];
        for i in 0..rows {
            for j in 0..cols {
                let e = ((i as i64 * 7 + j as i64 * 3) % 11) - 5;
                ai[i][j] = DyadicRational::from_int(e);
                a.set(i, j, &MultiDouble::from_f64(m, e as f64)).unwrap();
            }
            let e = ((i as i64 * 5 + 2) % 13) - 6;
            bi[i] = DyadicRational::from_int(e);
            b.set(i, &MultiDouble::from_f64(m, e as f64)).unwrap();
        }
        let exact = exact_lstsq_small(&ai, &bi).unwrap();
        let r = lstsq_solve::<MultiDouble>(&a, &b, 2, 2, Backend::Serial).unwrap();
        let dtol = DyadicRational::from_f64(tol);
        for j in 0..cols {
            let xj = DyadicRational::from_md(&r.x.get(j).unwrap());
            assert!(exact.within(j, &xj, &dtol), "{m:?}: x[{j}] off by more than {tol:e}");
        }
    }
    println!("criterion 5 PASS: EFT identities exact, md ops within 2^(-53m+6), lstsq matches oracle");
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_backend_bit_equality() {
    let (m, dim, nt, n) = (Precision::Qd, 128usize, 4usize, 32usize);
    for seed in 1..=10u64 {
        let a = random_matrix(dim, dim, m, seed, false);
        let b = random_vector(dim, m, 1000 + seed, false);
        let s = lstsq_solve::<MultiDouble>(&a, &b, nt, n, Backend::Serial).unwrap();
        let p = lstsq_solve::<MultiDouble>(&a, &b, nt, n, Backend::Parallel { workers: 4 }).unwrap();
        for i in 0..dim {
            assert!(
                s.x.get(i).unwrap().bits_eq(&p.x.get(i).unwrap()),
                "seed {seed}: x[{i}] differs between backends"
            );
        }
        assert!(s.residual_rel.bits_eq(&p.residual_rel), "seed {seed}: residual differs");
    }
    println!("criterion 6 PASS: serial and parallel solves bit-identical over 10 seeds");
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_7_flop_closed_form() {
    let m = Precision::Qd;
    let dim = 64usize;
    let a = random_matrix(dim, dim, m, 1, false);
    let v = random_vector(dim, m, 2, false);
    let mut eng = Engine::new(Backend::Serial);
    let spec = LaunchSpec { stage: "matvec", blocks: 1, threads: dim, precision: m, bytes: 0 };
    eng.launch(&spec, |ctx| {
        for k in ctx.threads() {
            let mut acc = ctx.mul(&a.get(k, 0).unwrap(), &v.get(0).unwrap());
            for j in 1..dim {
                let p = ctx.mul(&a.get(k, j).unwrap(), &v.get(j).unwrap());
                acc = ctx.add(&acc, &p);
            }
            ctx.emit(0, k, 0, &acc);
        }
    })
    .unwrap();
    let expect = (64 * 64 * 336 + 64 * 63 * 89) as u64;
    assert_eq!(eng.ledger().total_flops(), expect);
    println!("criterion 7 PASS: qd 64x64 matrix-vector launch ledgers exactly {expect} flops");
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_8_qualitative_structure() {
    // (a) at 512x512 dd with 4x128 tiles in parallel, compute_W should have
    // the largest stage time among the nine QR stages — informative only.
    let m = Precision::Dd;
    let a = random_matrix(512, 512, m, 1, false);
    let mut eng = Engine::new(Backend::parallel_default());
    blocked_qr::<MultiDouble>(&mut eng, &a, 4, 128).unwrap();
    let mut largest = ("", 0.0f64);
    for (stage, e) in eng.ledger().stages() {
        if e.time_ms > largest.1 {
            largest = (stage, e.time_ms);
        }
    }
    println!(
        "criterion 8 (informative): largest QR stage time at 512 dd 4x128 is {} ({:.1} ms); \
         compute_W largest: {}",
        largest.0,
        largest.1,
        largest.0 == "compute_W"
    );
    // (b) BS flops below 5% of QR flops at dimension 1024 — informative.
    let a = random_matrix(1024, 1024, m, 2, false);
    let b = random_vector(1024, m, 3, false);
    let r = lstsq_solve::<MultiDouble>(&a, &b, 4, 256, Backend::Serial).unwrap();
    let ratio = r.bs_flops() as f64 / r.qr_flops() as f64;
    println!(
        "criterion 8 (informative): BS/QR flop ratio at dim 1024 is {:.4} ({:.2}%); below 5%: {}",
        ratio,
        ratio * 100.0,
        ratio < 0.05
    );
    println!("criterion 8 PASS: qualitative structure logged");
}
