//! Command-line driver: run a QR factorization, a tiled back
//! substitution, or a full least squares solve at a chosen precision,
//! size, tiling, and backend, and emit the stage table, the launch
//! trace, and a one-row summary as CSV plus a human-readable report.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure. Numerics are deterministic for a fixed seed and identical
//! across backends; only timings vary between runs.

use crate::backsub::{tiled_back_sub, TiledUpperTriangular};
use crate::element::Element;
use crate::error::Error;
use crate::exec::{trace_csv, Backend, Engine, LaunchRecord};
use crate::flop::{FlopLedger, OpCounts};
use crate::layout::{
    footprint_bytes, random_matrix, random_upper_triangular, random_vector, StaggeredMatrix,
};
use crate::md::{format_decimal, rounding_self_check, ComplexMultiDouble, MultiDouble, Precision};
use crate::qr::blocked_qr;
use crate::solver::{lstsq_solve, residual_norms};
use clap::{Parser, ValueEnum};
use std::time::Instant;

pub const SUMMARY_HEADER: &str =
    "qr_kernel_ms,qr_wall_ms,bs_kernel_ms,bs_wall_ms,qr_flops,bs_flops,total_flops,residual";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Blocked Householder QR factorization of a random matrix.
    Qr,
    /// Tiled back substitution on a random upper triangular system.
    Bs,
    /// Full least squares solve: QR, Q^H b, back substitution.
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    /// Plain binary64 (reference only).
    D,
    /// Double double: 2 limbs, ~32 decimal digits.
    Dd,
    /// Quad double: 4 limbs, ~64 decimal digits.
    Qd,
    /// Octo double: 8 limbs, ~128 decimal digits.
    Od,
}

impl PrecisionArg {
    fn to_precision(self) -> Precision {
        match self {
            PrecisionArg::D => Precision::D,
            PrecisionArg::Dd => Precision::Dd,
            PrecisionArg::Qd => Precision::Qd,
            PrecisionArg::Od => Precision::Od,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    /// Blocks run one after another on the calling thread.
    Serial,
    /// Blocks distributed over worker threads (numerics unchanged).
    Parallel,
}

/// Tiled least squares at multiple double precision.
#[derive(Debug, Parser)]
#[command(name = "mdls", version, about)]
pub struct Cli {
    /// What to run.
    #[arg(long, value_enum, default_value = "solve")]
    pub mode: Mode,

    /// Working precision (number of binary64 limbs per value).
    #[arg(long, value_enum, default_value = "qd")]
    pub precision: PrecisionArg,

    /// Number of rows of the system matrix (columns are tiles x tile-size).
    #[arg(long, default_value_t = 256)]
    pub rows: usize,

    /// Number of column tiles N.
    #[arg(long, default_value_t = 4)]
    pub tiles: usize,

    /// Tile size n (columns per tile).
    #[arg(long, default_value_t = 64)]
    pub tile_size: usize,

    /// Use complex data (default: real).
    #[arg(long, default_value_t = false)]
    pub complex: bool,

    /// RNG seed for the matrix; the right-hand side uses seed + 1.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Execution backend.
    #[arg(long, value_enum, default_value = "parallel")]
    pub backend: BackendArg,

    /// Worker threads for the parallel backend (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,

    /// Output path prefix; writes <out>.stages.csv, <out>.trace.csv and
    /// <out>.summary.csv. Without it everything goes to stdout.
    #[arg(long)]
    pub out: Option<String>,

    /// Comma-separated list of square dimensions to sweep; each run uses
    /// rows = cols = dim with tile size dim / tiles.
    #[arg(long, value_delimiter = ',')]
    pub sweep_dims: Option<Vec<usize>>,
}

/// Everything one run produced, ready for serialization.
struct RunOutput {
    ledger: FlopLedger,
    trace: Vec<LaunchRecord>,
    kernel_ms: f64,
    wall_ms: f64,
    /// (qr_kernel, qr_wall, bs_kernel, bs_wall, qr_flops, bs_flops).
    split: (f64, f64, f64, f64, u64, u64),
    residual_rel: MultiDouble,
    residual_label: &'static str,
}

impl RunOutput {
    fn summary_row(&self) -> String {
        let (qk, qw, bk, bw, qf, bf) = self.split;
        format!(
            "{:.3},{:.3},{:.3},{:.3},{},{},{},{}",
            qk,
            qw,
            bk,
            bw,
            qf,
            bf,
            qf + bf,
            format_decimal(&self.residual_rel, 8)
        )
    }
}

fn backend_of(cli: &Cli) -> Backend {
    match cli.backend {
        BackendArg::Serial => Backend::Serial,
        BackendArg::Parallel => match cli.workers {
            Some(w) => Backend::Parallel { workers: w.max(1) },
            None => Backend::parallel_default(),
        },
    }
}

/// Relative Frobenius distance ||A - Q R||_F / ||A||_F at working
/// precision, exploiting the upper trapezoidal structure of R.
fn qr_reconstruction_rel<E: Element>(
    a: &StaggeredMatrix,
    q: &StaggeredMatrix,
    r: &StaggeredMatrix,
) -> Result<MultiDouble, Error> {
    let m = a.precision();
    let t = &mut OpCounts::default();
    let mut diff = MultiDouble::zero(m);
    let mut norm = MultiDouble::zero(m);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let mut s = E::zero(m);
            for l in 0..=j.min(a.rows() - 1) {
                let p = E::mul(&E::read(q, i, l), &E::read(r, l, j), t);
                s = E::add(&s, &p, t);
            }
            let aij = E::read(a, i, j);
            diff = diff.add(&E::sub(&aij, &s, t).norm_sq(t));
            norm = norm.add(&aij.norm_sq(t));
        }
    }
    let num = diff.sqrt().expect("sum of squares");
    let den = norm.sqrt().expect("sum of squares");
    if den.is_zero() { Ok(num) } else { num.div(&den) }
}

fn run_qr<E: Element>(cli: &Cli, rows: usize, tile_size: usize) -> Result<RunOutput, Error> {
    let m = cli.precision.to_precision();
    let cols = cli.tiles * tile_size;
    let a = random_matrix(rows, cols, m, cli.seed, E::COMPLEX);
    let mut eng = Engine::new(backend_of(cli));
    let start = Instant::now();
    let f = blocked_qr::<E>(&mut eng, &a, cli.tiles, tile_size)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let kernel_ms = eng.kernel_time_ms();
    let residual_rel = qr_reconstruction_rel::<E>(&a, &f.q, &f.r)?;
    let qf = eng.ledger().total_flops();
    Ok(RunOutput {
        ledger: eng.take_ledger(),
        trace: eng.records().to_vec(),
        kernel_ms,
        wall_ms,
        split: (kernel_ms, wall_ms, 0.0, 0.0, qf, 0),
        residual_rel,
        residual_label: "||A - QR||_F / ||A||_F",
    })
}

fn run_bs<E: Element>(cli: &Cli, tile_size: usize) -> Result<RunOutput, Error> {
    let m = cli.precision.to_precision();
    let dim = cli.tiles * tile_size;
    let u = random_upper_triangular(dim, m, cli.seed, E::COMPLEX)?;
    let b = random_vector(dim, m, cli.seed + 1, E::COMPLEX);
    let mut eng = Engine::new(backend_of(cli));
    let start = Instant::now();
    // the solve replaces diagonal tiles by their inverses in place, so the
    // residual must be taken against a copy of the original matrix
    let mut tu = TiledUpperTriangular::new(u.clone(), cli.tiles)?;
    let x = tiled_back_sub::<E>(&mut eng, &mut tu, &b)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let kernel_ms = eng.kernel_time_ms();
    let (_, residual_rel) = residual_norms::<E>(&u, &x, &b)?;
    let bf = eng.ledger().total_flops();
    Ok(RunOutput {
        ledger: eng.take_ledger(),
        trace: eng.records().to_vec(),
        kernel_ms,
        wall_ms,
        split: (0.0, 0.0, kernel_ms, wall_ms, 0, bf),
        residual_rel,
        residual_label: "||b - Ux||_2 / ||b||_2",
    })
}

fn run_solve<E: Element>(cli: &Cli, rows: usize, tile_size: usize) -> Result<RunOutput, Error> {
    let m = cli.precision.to_precision();
    let cols = cli.tiles * tile_size;
    let a = random_matrix(rows, cols, m, cli.seed, E::COMPLEX);
    let b = random_vector(rows, m, cli.seed + 1, E::COMPLEX);
    let r = lstsq_solve::<E>(&a, &b, cli.tiles, tile_size, backend_of(cli))?;
    let mut ledger = r.qr_ledger.clone();
    ledger.merge(&r.bs_ledger);
    let mut trace = r.qr_trace.clone();
    trace.extend(r.bs_trace.iter().cloned());
    Ok(RunOutput {
        ledger,
        trace,
        kernel_ms: r.qr_kernel_ms + r.bs_kernel_ms,
        wall_ms: r.qr_wall_ms + r.bs_wall_ms,
        split: (
            r.qr_kernel_ms,
            r.qr_wall_ms,
            r.bs_kernel_ms,
            r.bs_wall_ms,
            r.qr_flops(),
            r.bs_flops(),
        ),
        residual_rel: r.residual_rel,
        residual_label: "||b - Ax||_2 / ||b||_2",
    })
}

fn run_one(cli: &Cli, rows: usize, tile_size: usize) -> Result<RunOutput, Error> {
    match (cli.mode, cli.complex) {
        (Mode::Qr, false) => run_qr::<MultiDouble>(cli, rows, tile_size),
        (Mode::Qr, true) => run_qr::<ComplexMultiDouble>(cli, rows, tile_size),
        (Mode::Bs, false) => run_bs::<MultiDouble>(cli, tile_size),
        (Mode::Bs, true) => run_bs::<ComplexMultiDouble>(cli, tile_size),
        (Mode::Solve, false) => run_solve::<MultiDouble>(cli, rows, tile_size),
        (Mode::Solve, true) => run_solve::<ComplexMultiDouble>(cli, rows, tile_size),
    }
}

fn human_summary(cli: &Cli, rows: usize, tile_size: usize, out: &RunOutput) -> String {
    let m = cli.precision.to_precision();
    let cols = cli.tiles * tile_size;
    let mut s = String::new();
    let note = if m == Precision::D { " (reference only)" } else { "" };
    s.push_str(&format!(
        "mode {:?}, precision {}{}, {} x {} ({} tiles of size {}), {}, seed {}, backend {}\n",
        cli.mode,
        m.label(),
        note,
        rows,
        cols,
        cli.tiles,
        tile_size,
        if cli.complex { "complex" } else { "real" },
        cli.seed,
        backend_of(cli).label(),
    ));
    s.push_str(&out.ledger.to_string());
    let flops = out.ledger.total_flops();
    let bytes = footprint_bytes(rows, cols, m, cli.complex);
    s.push_str(&format!("all kernels : {:>10.3} ms\n", out.kernel_ms));
    s.push_str(&format!("wall clock  : {:>10.3} ms\n", out.wall_ms));
    if out.kernel_ms > 0.0 {
        s.push_str(&format!(
            "performance : {:>10.3} Gflop/s over all kernels\n",
            flops as f64 / (out.kernel_ms * 1e6)
        ));
    }
    if bytes > 0 {
        s.push_str(&format!(
            "intensity   : {:>10.3} flops/byte of matrix data\n",
            flops as f64 / bytes as f64
        ));
    }
    s.push_str(&format!(
        "residual    : {} = {}\n",
        out.residual_label,
        format_decimal(&out.residual_rel, 8)
    ));
    s
}

fn validate(cli: &Cli) -> Result<(), Error> {
    if cli.tiles == 0 || cli.tile_size == 0 {
        return Err(Error::InvalidConfig("tiles and tile-size must be >= 1".to_string()));
    }
    if cli.sweep_dims.is_none() && cli.rows < cli.tiles * cli.tile_size {
        return Err(Error::InvalidConfig(format!(
            "rows ({}) must be at least tiles x tile-size ({})",
            cli.rows,
            cli.tiles * cli.tile_size
        )));
    }
    if let Some(dims) = &cli.sweep_dims {
        if dims.is_empty() {
            return Err(Error::InvalidConfig("empty --sweep-dims list".to_string()));
        }
        for &d in dims {
            if d == 0 || d % cli.tiles != 0 {
                return Err(Error::InvalidConfig(format!(
                    "sweep dimension {} is not divisible by {} tiles",
                    d, cli.tiles
                )));
            }
        }
    }
    Ok(())
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::Parse(_) | Error::ShapeMismatch(_) => 2,
        _ => 3,
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    validate(cli)?;
    let m = cli.precision.to_precision();
    // (rows, tile_size) pairs to run; a sweep forces square matrices.
    let runs: Vec<(usize, usize)> = match &cli.sweep_dims {
        Some(dims) => dims.iter().map(|&d| (d, d / cli.tiles)).collect(),
        None => vec![(cli.rows, cli.tile_size)],
    };
    if m == Precision::Od && cli.complex {
        for &(rows, _) in &runs {
            if rows > 2048 {
                eprintln!(
                    "warning: octo double complex data at dimension {} is memory-heavy \
                     ({} MB for the matrix alone)",
                    rows,
                    footprint_bytes(rows, rows, m, true) / (1 << 20)
                );
            }
        }
    }
    let mut stages = String::new();
    let mut trace = String::new();
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut human = String::new();
    for (k, &(rows, tile_size)) in runs.iter().enumerate() {
        let out = run_one(cli, rows, tile_size)?;
        let stage_csv = out.ledger.to_csv();
        stages.push_str(if k == 0 { &stage_csv } else { stage_csv.split_once('\n').unwrap().1 });
        let trace_rows = trace_csv(&out.trace);
        trace.push_str(if k == 0 { &trace_rows } else { trace_rows.split_once('\n').unwrap().1 });
        summary.push_str(&out.summary_row());
        summary.push('\n');
        human.push_str(&human_summary(cli, rows, tile_size, &out));
        human.push('\n');
    }
    match &cli.out {
        Some(prefix) => {
            std::fs::write(format!("{prefix}.stages.csv"), &stages)?;
            std::fs::write(format!("{prefix}.trace.csv"), &trace)?;
            std::fs::write(format!("{prefix}.summary.csv"), &summary)?;
            print!("{human}");
        }
        None => {
            println!("# stages");
            print!("{stages}");
            println!("# trace");
            print!("{trace}");
            println!("# summary");
            print!("{summary}");
            println!("# report");
            print!("{human}");
        }
    }
    Ok(())
}

pub fn run() -> i32 {
    if !rounding_self_check() {
        eprintln!("error: {}", Error::RoundingModeBroken);
        return 3;
    }
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
