//! Staggered storage of multiple-double matrices and vectors.
//!
//! An `m`-limb matrix is kept as `m` row-major planes of plain doubles,
//! most significant plane first; complex data carries a parallel set of
//! imaginary planes. Kernels then stream one plane at a time instead of
//! chasing per-element limb arrays.
//!
//! Also provides seeded test-data generation and a self-describing text
//! file format with hex-encoded binary64 payloads (bit-exact round trip).

use crate::error::Error;
use crate::md::{ComplexMultiDouble, MultiDouble, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};

/// All planes are row-major: element (i, j) lives at `i * cols + j`.
/// Kernels and the file format both assume this ordering.
pub const ROW_MAJOR: bool = true;

/// Frozen identifier of the generator behind `random_*`; recorded in file
/// headers so fixtures stay stable across platforms.
pub const RNG_ID: &str = "chacha8";

/// `rows x cols` multiple-double matrix as significance-ordered planes.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredMatrix {
    rows: usize,
    cols: usize,
    m: Precision,
    /// `m` planes of `rows * cols` doubles, most significant first.
    planes: Vec<Vec<f64>>,
    /// Imaginary planes, same shape; present exactly when complex.
    im_planes: Option<Vec<Vec<f64>>>,
    /// Generator id and seed when produced by `random_*`, for file headers.
    provenance: Option<(String, u64)>,
}

impl StaggeredMatrix {
    pub fn zeros(rows: usize, cols: usize, m: Precision, complex: bool) -> Self {
        assert!(rows >= 1 && cols >= 1, "dimensions must be at least 1");
        let mk = || vec![vec![0.0; rows * cols]; m.limbs()];
        StaggeredMatrix {
            rows,
            cols,
            m,
            planes: mk(),
            im_planes: complex.then(mk),
            provenance: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn precision(&self) -> Precision {
        self.m
    }

    pub fn is_complex(&self) -> bool {
        self.im_planes.is_some()
    }

    pub fn provenance(&self) -> Option<(&str, u64)> {
        self.provenance.as_ref().map(|(id, s)| (id.as_str(), *s))
    }

    /// Bytes occupied by the element payload (both plane sets if complex).
    pub fn footprint_bytes(&self) -> u64 {
        footprint_bytes(self.rows, self.cols, self.m, self.is_complex())
    }

    fn check(&self, i: usize, j: usize) -> Result<usize, Error> {
        if i >= self.rows || j >= self.cols {
            return Err(Error::IndexOutOfRange { i, j, rows: self.rows, cols: self.cols });
        }
        Ok(i * self.cols + j)
    }

    fn assemble(&self, planes: &[Vec<f64>], at: usize) -> MultiDouble {
        let limbs: Vec<f64> = planes.iter().map(|p| p[at]).collect();
        MultiDouble::from_normalized_limbs(self.m, &limbs)
    }

    /// Real part of element (i, j).
    pub fn get(&self, i: usize, j: usize) -> Result<MultiDouble, Error> {
        let at = self.check(i, j)?;
        Ok(self.assemble(&self.planes, at))
    }

    pub fn set(&mut self, i: usize, j: usize, v: &MultiDouble) -> Result<(), Error> {
        assert_eq!(v.precision(), self.m, "precision mismatch");
        let at = self.check(i, j)?;
        for (k, p) in self.planes.iter_mut().enumerate() {
            p[at] = v.limbs()[k];
        }
        if let Some(im) = &mut self.im_planes {
            for p in im.iter_mut() {
                p[at] = 0.0;
            }
        }
        Ok(())
    }

    /// Store possibly unnormalized limbs; the value is renormalized on
    /// ingest so `get` always returns a valid expansion.
    pub fn set_limbs(&mut self, i: usize, j: usize, limbs: &[f64]) -> Result<(), Error> {
        let v = MultiDouble::renormalize(limbs, self.m)?;
        self.set(i, j, &v)
    }

    pub fn get_c(&self, i: usize, j: usize) -> Result<ComplexMultiDouble, Error> {
        let at = self.check(i, j)?;
        let re = self.assemble(&self.planes, at);
        let im = match &self.im_planes {
            Some(planes) => self.assemble(planes, at),
            None => MultiDouble::zero(self.m),
        };
        Ok(ComplexMultiDouble::new(re, im))
    }

    pub fn set_c(&mut self, i: usize, j: usize, v: &ComplexMultiDouble) -> Result<(), Error> {
        assert_eq!(v.precision(), self.m, "precision mismatch");
        let at = self.check(i, j)?;
        for (k, p) in self.planes.iter_mut().enumerate() {
            p[at] = v.re.limbs()[k];
        }
        match &mut self.im_planes {
            Some(planes) => {
                for (k, p) in planes.iter_mut().enumerate() {
                    p[at] = v.im.limbs()[k];
                }
            }
            None => {
                if !v.im.is_zero() {
                    return Err(Error::ShapeMismatch(
                        "cannot store a complex value in a real matrix".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Identity of the appropriate flavor in the top-left `n x n` corner.
    pub fn identity(n: usize, m: Precision, complex: bool) -> Self {
        let mut a = Self::zeros(n, n, m, complex);
        let one = MultiDouble::one(m);
        for i in 0..n {
            a.set(i, i, &one).unwrap();
        }
        a
    }
}

/// Length-`n` multiple-double vector; same plane layout with cols = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredVector {
    inner: StaggeredMatrix,
}

impl StaggeredVector {
    pub fn zeros(len: usize, m: Precision, complex: bool) -> Self {
        StaggeredVector { inner: StaggeredMatrix::zeros(len, 1, m, complex) }
    }

    pub fn len(&self) -> usize {
        self.inner.rows
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn precision(&self) -> Precision {
        self.inner.m
    }

    pub fn is_complex(&self) -> bool {
        self.inner.is_complex()
    }

    pub fn footprint_bytes(&self) -> u64 {
        self.inner.footprint_bytes()
    }

    pub fn get(&self, i: usize) -> Result<MultiDouble, Error> {
        self.inner.get(i, 0)
    }

    pub fn set(&mut self, i: usize, v: &MultiDouble) -> Result<(), Error> {
        self.inner.set(i, 0, v)
    }

    pub fn get_c(&self, i: usize) -> Result<ComplexMultiDouble, Error> {
        self.inner.get_c(i, 0)
    }

    pub fn set_c(&mut self, i: usize, v: &ComplexMultiDouble) -> Result<(), Error> {
        self.inner.set_c(i, 0, v)
    }

    pub fn as_matrix(&self) -> &StaggeredMatrix {
        &self.inner
    }

    pub fn from_matrix(m: StaggeredMatrix) -> Result<Self, Error> {
        if m.cols != 1 {
            return Err(Error::ShapeMismatch(format!(
                "a vector must have one column, got {}",
                m.cols
            )));
        }
        Ok(StaggeredVector { inner: m })
    }
}

pub fn footprint_bytes(rows: usize, cols: usize, m: Precision, complex: bool) -> u64 {
    (rows * cols * m.limbs() * 8 * if complex { 2 } else { 1 }) as u64
}

/// One random value with every limb populated: the leading limb is uniform
/// in [-1, 1] and limb k is a fresh uniform draw scaled by 2^(-53 k).
fn random_value(rng: &mut ChaCha8Rng, m: Precision) -> MultiDouble {
    let mut limbs = Vec::with_capacity(m.limbs());
    let mut scale = 1.0;
    for _ in 0..m.limbs() {
        limbs.push(rng.gen_range(-1.0..=1.0) * scale);
        scale *= f64::powi(2.0, -53);
    }
    MultiDouble::renormalize(&limbs, m).expect("finite draws")
}

/// Seeded dense random matrix; deterministic for a fixed seed.
pub fn random_matrix(
    rows: usize,
    cols: usize,
    m: Precision,
    seed: u64,
    complex: bool,
) -> StaggeredMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = StaggeredMatrix::zeros(rows, cols, m, complex);
    for i in 0..rows {
        for j in 0..cols {
            if complex {
                let re = random_value(&mut rng, m);
                let im = random_value(&mut rng, m);
                a.set_c(i, j, &ComplexMultiDouble::new(re, im)).unwrap();
            } else {
                a.set(i, j, &random_value(&mut rng, m)).unwrap();
            }
        }
    }
    a.provenance = Some((RNG_ID.to_string(), seed));
    a
}

/// Seeded random vector.
pub fn random_vector(len: usize, m: Precision, seed: u64, complex: bool) -> StaggeredVector {
    StaggeredVector { inner: random_matrix(len, 1, m, seed, complex) }
}

/// Random upper triangular matrix obtained as the U factor of an LU
/// factorization (with partial pivoting) of a seeded dense random matrix.
/// Entrywise-random triangular matrices are almost surely terribly
/// conditioned; U factors of random dense matrices are not. Diagonal
/// magnitudes below 10^-3 trigger a resample, up to 100 attempts.
pub fn random_upper_triangular(
    n: usize,
    m: Precision,
    seed: u64,
    complex: bool,
) -> Result<StaggeredMatrix, Error> {
    const MAX_ATTEMPTS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        // draw the dense matrix from the streaming generator so each
        // attempt sees fresh values
        let mut work: Vec<Vec<ComplexMultiDouble>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let re = random_value(&mut rng, m);
                        let im = if complex {
                            random_value(&mut rng, m)
                        } else {
                            MultiDouble::zero(m)
                        };
                        ComplexMultiDouble::new(re, im)
                    })
                    .collect()
            })
            .collect();
        if let Some(u) = lu_upper(&mut work, n, m) {
            let mut out = StaggeredMatrix::zeros(n, n, m, complex);
            for i in 0..n {
                for j in i..n {
                    out.set_c(i, j, &u[i][j])?;
                }
            }
            out.provenance = Some((RNG_ID.to_string(), seed));
            return Ok(out);
        }
    }
    Err(Error::GenerationFailed(MAX_ATTEMPTS))
}

/// In-place LU with partial pivoting; returns the U rows, or None when a
/// diagonal entry lands below the conditioning floor.
fn lu_upper(
    a: &mut [Vec<ComplexMultiDouble>],
    n: usize,
    m: Precision,
) -> Option<Vec<Vec<ComplexMultiDouble>>> {
    let floor = MultiDouble::from_f64(m, 1e-6); // |u_kk|^2 >= (10^-3)^2
    for k in 0..n {
        // partial pivot on |.|^2 leading limbs
        let p = (k..n)
            .max_by(|&i, &j| {
                let ai = a[i][k].norm_sq().hi();
                let aj = a[j][k].norm_sq().hi();
                ai.partial_cmp(&aj).unwrap()
            })
            .unwrap();
        a.swap(k, p);
        let pivot = a[k][k];
        if pivot.norm_sq().cmp_value(&floor) == std::cmp::Ordering::Less {
            return None;
        }
        for i in k + 1..n {
            let l = a[i][k].div(&pivot).ok()?;
            for j in k + 1..n {
                let t = a[k][j].mul(&l);
                a[i][j] = a[i][j].sub(&t);
            }
            a[i][k] = ComplexMultiDouble::zero(m);
        }
    }
    Some(a.to_vec())
}

// ---- file format -----------------------------------------------------

const MAGIC: &str = "mdmat v1";

/// Write the self-describing text format: a header followed by each plane
/// as whitespace-separated hex-encoded binary64 values.
pub fn write_matrix<W: Write>(w: &mut W, a: &StaggeredMatrix) -> Result<(), Error> {
    let (rng_id, seed) = match a.provenance() {
        Some((id, s)) => (id.to_string(), s.to_string()),
        None => ("-".to_string(), "-".to_string()),
    };
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "rows {}", a.rows)?;
    writeln!(w, "cols {}", a.cols)?;
    writeln!(w, "m {}", a.m.limbs())?;
    writeln!(w, "complex {}", u8::from(a.is_complex()))?;
    writeln!(w, "rng {rng_id}")?;
    writeln!(w, "seed {seed}")?;
    let mut dump = |tag: &str, planes: &[Vec<f64>]| -> Result<(), Error> {
        for (k, p) in planes.iter().enumerate() {
            writeln!(w, "plane {tag} {k}")?;
            for row in p.chunks(a.cols) {
                let line: Vec<String> =
                    row.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        Ok(())
    };
    dump("re", &a.planes)?;
    if let Some(im) = &a.im_planes {
        dump("im", im)?;
    }
    Ok(())
}

/// Read the format written by [`write_matrix`]; bit-exact round trip.
pub fn read_matrix<R: BufRead>(r: &mut R) -> Result<StaggeredMatrix, Error> {
    let bad = |msg: &str| Error::Parse(format!("matrix file: {msg}"));
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String, Error> {
        lines
            .next()
            .ok_or_else(|| bad(&format!("unexpected end of file before {what}")))?
            .map_err(Error::Io)
    };
    if next("magic")? != MAGIC {
        return Err(bad("bad magic line"));
    }
    let mut field = |name: &str| -> Result<String, Error> {
        let line = next(name)?;
        line.strip_prefix(&format!("{name} "))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("expected '{name}' header line, got {line:?}")))
    };
    let rows: usize = field("rows")?.parse().map_err(|_| bad("bad rows"))?;
    let cols: usize = field("cols")?.parse().map_err(|_| bad("bad cols"))?;
    let m = Precision::from_limbs(field("m")?.parse().map_err(|_| bad("bad m"))?)
        .ok_or_else(|| bad("unsupported limb count"))?;
    let complex = match field("complex")?.as_str() {
        "0" => false,
        "1" => true,
        _ => return Err(bad("bad complex flag")),
    };
    let rng_id = field("rng")?;
    let seed = field("seed")?;
    let mut a = StaggeredMatrix::zeros(rows, cols, m, complex);
    if rng_id != "-" {
        a.provenance = Some((rng_id, seed.parse().map_err(|_| bad("bad seed"))?));
    }
    let n_sets = if complex { 2 } else { 1 };
    for set in 0..n_sets {
        let tag = if set == 0 { "re" } else { "im" };
        for k in 0..m.limbs() {
            let header = next("plane header")?;
            if header != format!("plane {tag} {k}") {
                return Err(bad(&format!("expected plane {tag} {k}, got {header:?}")));
            }
            let plane = if set == 0 {
                &mut a.planes[k]
            } else {
                &mut a.im_planes.as_mut().unwrap()[k]
            };
            let mut at = 0;
            while at < rows * cols {
                let line = next("plane data")?;
                for tok in line.split_whitespace() {
                    if at >= rows * cols {
                        return Err(bad("too many values in plane"));
                    }
                    let bits = u64::from_str_radix(tok, 16).map_err(|_| bad("bad hex value"))?;
                    plane[at] = f64::from_bits(bits);
                    at += 1;
                }
            }
        }
    }
    Ok(a)
}
