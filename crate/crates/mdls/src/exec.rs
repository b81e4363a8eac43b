//! Kernel-launch execution model.
//!
//! A launch runs one kernel body over `B` blocks of `T` threads. Launches
//! are sequentially ordered; blocks within a launch are independent and
//! may run concurrently; threads within a block are virtualized (the body
//! iterates them), so a block barrier is a phase marker rather than a
//! synchronization point.
//!
//! Kernel bodies read shared state through captured references and emit
//! writes into a per-block buffer. The engine applies buffered writes in
//! block order after all blocks finish, which makes the serial and
//! thread-pool backends bit-identical by construction and makes write
//! conflicts detectable.

use crate::element::Element;
use crate::error::Error;
use crate::flop::{FlopLedger, OpCounts};
use crate::md::{ComplexMultiDouble, MultiDouble, Precision};
use std::collections::HashSet;
use std::time::Instant;

/// Which executor runs the blocks of a launch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Reference: blocks run one after another on the calling thread.
    Serial,
    /// Blocks distributed over `workers` OS threads.
    Parallel { workers: usize },
}

impl Backend {
    pub fn parallel_default() -> Self {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        Backend::Parallel { workers }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Backend::Serial => "serial",
            Backend::Parallel { .. } => "parallel",
        }
    }
}

/// Geometry and accounting identity of one launch.
#[derive(Debug, Clone)]
pub struct LaunchSpec {
    pub stage: &'static str,
    pub blocks: usize,
    pub threads: usize,
    pub precision: Precision,
    /// Bytes the launch reads plus writes; feeds arithmetic intensity.
    pub bytes: u64,
}

/// What one launch did; appended to the engine trace in launch order.
#[derive(Debug, Clone)]
pub struct LaunchRecord {
    pub stage: &'static str,
    pub blocks: usize,
    pub threads: usize,
    pub elapsed_ms: f64,
    pub flops: u64,
}

/// One buffered element store: `slot` selects the destination container
/// (kernel-defined), `(i, j)` the element. Values travel in complex form;
/// real kernels carry a zero imaginary part.
#[derive(Debug, Clone)]
pub struct WriteOp {
    pub slot: usize,
    pub i: usize,
    pub j: usize,
    pub val: ComplexMultiDouble,
}

/// Per-block kernel context: identity, counted arithmetic, write buffer.
pub struct BlockCtx {
    block: usize,
    threads: usize,
    m: Precision,
    tally: OpCounts,
    writes: Vec<WriteOp>,
}

impl BlockCtx {
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn threads(&self) -> std::ops::Range<usize> {
        0..self.threads
    }

    pub fn precision(&self) -> Precision {
        self.m
    }

    /// Phase marker. Threads are virtualized sequentially, so every
    /// pre-barrier write is already visible; the call documents the
    /// block-synchronous structure of the kernel.
    pub fn barrier(&self) {}

    /// Buffer a store; applied after all blocks of the launch complete.
    pub fn emit<E: Element>(&mut self, slot: usize, i: usize, j: usize, val: &E) {
        self.writes.push(WriteOp { slot, i, j, val: val.to_complex() });
    }

    // counted arithmetic ------------------------------------------------

    pub fn add<E: Element>(&mut self, a: &E, b: &E) -> E {
        E::add(a, b, &mut self.tally)
    }

    pub fn sub<E: Element>(&mut self, a: &E, b: &E) -> E {
        E::sub(a, b, &mut self.tally)
    }

    pub fn mul<E: Element>(&mut self, a: &E, b: &E) -> E {
        E::mul(a, b, &mut self.tally)
    }

    pub fn div<E: Element>(&mut self, a: &E, b: &E) -> Result<E, Error> {
        E::div(a, b, &mut self.tally)
    }

    pub fn scale_re<E: Element>(&mut self, a: &E, s: &MultiDouble) -> E {
        a.scale_re(s, &mut self.tally)
    }

    pub fn norm_sq<E: Element>(&mut self, a: &E) -> MultiDouble {
        a.norm_sq(&mut self.tally)
    }

    pub fn modulus<E: Element>(&mut self, a: &E) -> MultiDouble {
        a.modulus(&mut self.tally)
    }

    pub fn unit_dir<E: Element>(&mut self, a: &E, h: &MultiDouble) -> E {
        a.unit_dir(h, &mut self.tally)
    }

    pub fn sqrt_re(&mut self, a: &MultiDouble) -> Result<MultiDouble, Error> {
        self.tally.sqrt += 1;
        a.sqrt()
    }

    pub fn div_re(&mut self, a: &MultiDouble, b: &MultiDouble) -> Result<MultiDouble, Error> {
        self.tally.div += 1;
        a.div(b)
    }

    pub fn add_re(&mut self, a: &MultiDouble, b: &MultiDouble) -> MultiDouble {
        self.tally.add += 1;
        a.add(b)
    }

    pub fn mul_re(&mut self, a: &MultiDouble, b: &MultiDouble) -> MultiDouble {
        self.tally.mul += 1;
        a.mul(b)
    }

    /// Fixed binary tree sum: pairwise rounds, last element carried when
    /// the round is odd. The shape depends only on the length, never on
    /// thread timing, so reductions are bitwise reproducible.
    pub fn reduce<E: Element>(&mut self, vals: &[E]) -> E {
        assert!(!vals.is_empty(), "reduce over an empty slice");
        let mut level: Vec<E> = vals.to_vec();
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                next.push(if pair.len() == 2 {
                    self.add(&pair[0], &pair[1])
                } else {
                    pair[0]
                });
            }
            level = next;
        }
        level[0]
    }
}

/// Runs launches against one backend, keeping the trace and the ledger.
pub struct Engine {
    backend: Backend,
    records: Vec<LaunchRecord>,
    ledger: FlopLedger,
    /// Reject overlapping writes within a launch; on by default in debug
    /// builds, switchable for large runs.
    check_writes: bool,
}

impl Engine {
    pub fn new(backend: Backend) -> Self {
        Engine {
            backend,
            records: Vec::new(),
            ledger: FlopLedger::new(),
            check_writes: cfg!(debug_assertions),
        }
    }

    pub fn set_write_check(&mut self, on: bool) {
        self.check_writes = on;
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn records(&self) -> &[LaunchRecord] {
        &self.records
    }

    pub fn ledger(&self) -> &FlopLedger {
        &self.ledger
    }

    pub fn take_ledger(&mut self) -> FlopLedger {
        std::mem::take(&mut self.ledger)
    }

    /// Total time spent inside kernels ("all kernels" row).
    pub fn kernel_time_ms(&self) -> f64 {
        self.records.iter().map(|r| r.elapsed_ms).sum()
    }

    /// Execute one launch. `body` runs once per block against a
    /// [`BlockCtx`]. The buffered writes are returned in block order then
    /// emit order; the caller applies them, completing the launch's
    /// write-visibility contract before the next launch.
    pub fn launch<B>(&mut self, spec: &LaunchSpec, body: B) -> Result<Vec<WriteOp>, Error>
    where
        B: Fn(&mut BlockCtx) + Sync,
    {
        if spec.blocks == 0 || spec.threads == 0 {
            return Err(Error::InvalidLaunch(format!(
                "stage '{}' needs blocks >= 1 and threads >= 1, got {}x{}",
                spec.stage, spec.blocks, spec.threads
            )));
        }
        let start = Instant::now();
        let blocks = self.run_blocks(spec, &body);
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

        let mut tally = OpCounts::default();
        let mut seen = HashSet::new();
        for ctx in &blocks {
            tally.merge(&ctx.tally);
            if self.check_writes {
                for w in &ctx.writes {
                    if !seen.insert((w.slot, w.i, w.j)) {
                        return Err(Error::OverlappingWrites {
                            stage: spec.stage.to_string(),
                            i: w.i,
                            j: w.j,
                        });
                    }
                }
            }
        }
        let flops = tally.flops(spec.precision);
        self.records.push(LaunchRecord {
            stage: spec.stage,
            blocks: spec.blocks,
            threads: spec.threads,
            elapsed_ms,
            flops,
        });
        self.ledger.record(spec.stage, spec.precision, tally, elapsed_ms, spec.bytes);
        Ok(blocks.into_iter().flat_map(|c| c.writes).collect())
    }

    fn run_blocks<B>(&self, spec: &LaunchSpec, body: &B) -> Vec<BlockCtx>
    where
        B: Fn(&mut BlockCtx) + Sync,
    {
        let mk = |block: usize| BlockCtx {
            block,
            threads: spec.threads,
            m: spec.precision,
            tally: OpCounts::default(),
            writes: Vec::new(),
        };
        let workers = match self.backend {
            Backend::Serial => 1,
            Backend::Parallel { workers } => workers.max(1),
        };
        if workers == 1 || spec.blocks == 1 {
            return (0..spec.blocks)
                .map(|b| {
                    let mut ctx = mk(b);
                    body(&mut ctx);
                    ctx
                })
                .collect();
        }
        // contiguous block ranges per worker; results reassembled in block
        // order so downstream write application is order-independent of
        // scheduling
        let workers = workers.min(spec.blocks);
        let per = spec.blocks.div_ceil(workers);
        let mut out: Vec<Option<BlockCtx>> = (0..spec.blocks).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut rest = out.as_mut_slice();
            let mut base = 0;
            let mut handles = Vec::new();
            while !rest.is_empty() {
                let take = per.min(rest.len());
                let (chunk, tail) = rest.split_at_mut(take);
                rest = tail;
                let start = base;
                base += take;
                handles.push(scope.spawn(move || {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        let mut ctx = mk(start + k);
                        body(&mut ctx);
                        *slot = Some(ctx);
                    }
                }));
            }
            for h in handles {
                h.join().expect("kernel worker panicked");
            }
        });
        out.into_iter().map(|c| c.expect("every block ran")).collect()
    }

    /// One CSV row per launch: stage, B, T, ms, flops.
    pub fn trace_csv(&self) -> String {
        trace_csv(&self.records)
    }
}

/// CSV serialization of a launch trace: one row per launch.
pub fn trace_csv(records: &[LaunchRecord]) -> String {
    let mut s = String::from("stage,blocks,threads,time_ms,flops\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{:.3},{}\n",
            r.stage, r.blocks, r.threads, r.elapsed_ms, r.flops
        ));
    }
    s
}
