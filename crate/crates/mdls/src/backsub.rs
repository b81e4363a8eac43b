//! Tiled back substitution for upper triangular systems.
//!
//! The matrix is cut into N tiles of size n along the diagonal. One launch
//! inverts every diagonal tile in place (N blocks, thread k of a block
//! solves for column k of the tile inverse). Back substitution then walks
//! the tiles from the bottom: one launch multiplies the current right-hand
//! side slice by the inverted tile, and one single-block launch per
//! remaining tile row subtracts the coupling term from that slice of the
//! right-hand side. The trace therefore holds exactly 1 + N(N+1)/2 launch
//! records for N tiles.

use crate::element::Element;
use crate::error::Error;
use crate::exec::{Engine, LaunchSpec};
use crate::layout::{StaggeredMatrix, StaggeredVector};
use crate::md::Precision;

/// Ledger stage labels of the three kernel kinds.
pub const STAGE_INVERT: &str = "invert_diagonal_tiles";
pub const STAGE_MULTIPLY: &str = "multiply_with_inverses";
pub const STAGE_UPDATE: &str = "back_substitution_update";

/// An upper triangular matrix with a tiling of its diagonal.
#[derive(Debug, Clone)]
pub struct TiledUpperTriangular {
    u: StaggeredMatrix,
    n_tiles: usize,
    tile_size: usize,
}

impl TiledUpperTriangular {
    /// Wrap a square upper triangular matrix. Strictly-below-diagonal
    /// entries must be exact zeros.
    pub fn new(u: StaggeredMatrix, n_tiles: usize) -> Result<Self, Error> {
        if n_tiles == 0 || u.rows() != u.cols() || u.rows() % n_tiles != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix cannot be tiled into {n_tiles} diagonal tiles",
                u.rows(),
                u.cols()
            )));
        }
        for i in 0..u.rows() {
            for j in 0..i {
                if !u.get_c(i, j)?.is_zero() {
                    return Err(Error::ShapeMismatch(format!(
                        "entry ({i}, {j}) below the diagonal is not zero"
                    )));
                }
            }
        }
        let tile_size = u.rows() / n_tiles;
        Ok(TiledUpperTriangular { u, n_tiles, tile_size })
    }

    pub fn n_tiles(&self) -> usize {
        self.n_tiles
    }

    pub fn tile_size(&self) -> usize {
        self.tile_size
    }

    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    pub fn matrix(&self) -> &StaggeredMatrix {
        &self.u
    }

    pub fn into_matrix(self) -> StaggeredMatrix {
        self.u
    }
}

fn elem_bytes(m: Precision, complex: bool) -> u64 {
    (m.limbs() * 8 * if complex { 2 } else { 1 }) as u64
}

/// Replace every diagonal tile by its inverse, as one launch of N blocks
/// with n threads: thread k back-solves `U_t v = e_k` for column k of the
/// inverse, independently of all other threads.
pub fn invert_diagonal_tiles<E: Element>(
    eng: &mut Engine,
    tu: &mut TiledUpperTriangular,
) -> Result<(), Error> {
    let (nt, n) = (tu.n_tiles, tu.tile_size);
    let m = tu.u.precision();
    // singularity is decided host-side so kernel divisions cannot fail;
    // a subnormal leading limb counts as singular
    for t in 0..nt {
        for r in 0..n {
            let g = t * n + r;
            let z = tu.u.get_c(g, g)?;
            let lead = z.re.hi().abs().max(z.im.hi().abs());
            if !lead.is_normal() {
                return Err(Error::SingularTile { tile: t, row: r });
            }
        }
    }
    let spec = LaunchSpec {
        stage: STAGE_INVERT,
        blocks: nt,
        threads: n,
        precision: m,
        bytes: 2 * (nt * n * n) as u64 * elem_bytes(m, E::COMPLEX),
    };
    let u = &tu.u;
    let writes = eng.launch(&spec, |ctx| {
        let base = ctx.block() * n;
        let at = |i: usize, j: usize| E::read(u, base + i, base + j);
        for k in ctx.threads() {
            let mut v = vec![E::zero(m); k + 1];
            let one = E::one(m);
            v[k] = ctx.div(&one, &at(k, k)).expect("diagonal checked nonzero");
            for i in (0..k).rev() {
                let mut s = E::zero(m);
                for j in i + 1..=k {
                    let t = ctx.mul(&at(i, j), &v[j]);
                    s = ctx.add(&s, &t);
                }
                let q = ctx.div(&s, &at(i, i)).expect("diagonal checked nonzero");
                v[i] = q.neg();
            }
            for (i, vi) in v.iter().enumerate() {
                ctx.emit(0, base + i, base + k, vi);
            }
        }
    })?;
    for w in &writes {
        let val = E::from_complex(&w.val);
        E::write(&mut tu.u, w.i, w.j, &val)?;
    }
    Ok(())
}

/// Solve `U x = b`. Inverts the diagonal tiles first, then alternates
/// multiply and update launches from the last tile upward; the trace gains
/// exactly `1 + N(N+1)/2` records.
pub fn tiled_back_sub<E: Element>(
    eng: &mut Engine,
    tu: &mut TiledUpperTriangular,
    b: &StaggeredVector,
) -> Result<StaggeredVector, Error> {
    let (nt, n) = (tu.n_tiles, tu.tile_size);
    let m = tu.u.precision();
    if b.len() != tu.dim() {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side length {} does not match dimension {}",
            b.len(),
            tu.dim()
        )));
    }
    if b.precision() != m {
        return Err(Error::ShapeMismatch("precision mismatch between U and b".to_string()));
    }
    invert_diagonal_tiles::<E>(eng, tu)?;
    let eb = elem_bytes(m, E::COMPLEX);
    let mut x = StaggeredVector::zeros(tu.dim(), m, E::COMPLEX);
    let mut rhs = b.clone();
    for i in (0..nt).rev() {
        let base = i * n;
        // x_i = U_i^{-1} b_i: one block, thread t takes row t
        let u = &tu.u;
        let spec = LaunchSpec {
            stage: STAGE_MULTIPLY,
            blocks: 1,
            threads: n,
            precision: m,
            bytes: (n * n + 2 * n) as u64 * eb,
        };
        let rhs_ref = &rhs;
        let writes = eng.launch(&spec, |ctx| {
            for t in ctx.threads() {
                let mut s = E::zero(m);
                // the inverted tile is upper triangular: columns < t are zero
                for j in t..n {
                    let p = ctx.mul(&E::read(u, base + t, base + j), &E::read_vec(rhs_ref, base + j));
                    s = ctx.add(&s, &p);
                }
                ctx.emit(1, base + t, 0, &s);
            }
        })?;
        for w in &writes {
            let val = E::from_complex(&w.val);
            E::write_vec(&mut x, w.i, &val)?;
        }
        // b_j -= U_{j,i} x_i for every tile row j above; one launch each
        for j in 0..i {
            let jb = j * n;
            let spec = LaunchSpec {
                stage: STAGE_UPDATE,
                blocks: 1,
                threads: n,
                precision: m,
                bytes: (n * n + 2 * n) as u64 * eb,
            };
            let u = &tu.u;
            let x_ref = &x;
            let rhs_ref = &rhs;
            let writes = eng.launch(&spec, |ctx| {
                for t in ctx.threads() {
                    let mut s = E::zero(m);
                    for k in 0..n {
                        let p = ctx.mul(&E::read(u, jb + t, base + k), &E::read_vec(x_ref, base + k));
                        s = ctx.add(&s, &p);
                    }
                    let nv = ctx.sub(&E::read_vec(rhs_ref, jb + t), &s);
                    ctx.emit(2, jb + t, 0, &nv);
                }
            })?;
            for w in &writes {
                let val = E::from_complex(&w.val);
                E::write_vec(&mut rhs, w.i, &val)?;
            }
        }
    }
    Ok(x)
}

/// Reference sequential back substitution at the same precision, outside
/// the launch model and the ledger; used to cross-check the tiled solve.
pub fn plain_back_sub<E: Element>(
    u: &StaggeredMatrix,
    b: &StaggeredVector,
) -> Result<Vec<E>, Error> {
    let n = u.rows();
    let m = u.precision();
    let mut scratch = crate::flop::OpCounts::default();
    let t = &mut scratch;
    let mut x = vec![E::zero(m); n];
    for i in (0..n).rev() {
        let mut s = E::read_vec(b, i);
        for j in i + 1..n {
            let p = E::mul(&E::read(u, i, j), &x[j], t);
            s = E::sub(&s, &p, t);
        }
        x[i] = E::div(&s, &E::read(u, i, i), t)?;
    }
    Ok(x)
}
