//! Base-double operation counts for multiple-double arithmetic and the
//! per-stage flop ledger used by every kernel launch.
//!
//! The cost table records, for each precision level and multiple-double
//! operation, how many hardware additions, subtractions, multiplications,
//! and divisions one such operation expands to, together with their sum.
//! Those sums turn per-kernel tallies of multiple-double operations into
//! double-precision flop counts.

use crate::md::Precision;
use std::fmt;

/// Multiple-double operation kinds tracked by the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Add,
    Mul,
    Div,
}

/// One row of the cost table: base-double {+, -, *, /} counts and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCost {
    pub add: u64,
    pub sub: u64,
    pub mul: u64,
    pub div: u64,
}

impl OpCost {
    pub const fn total(&self) -> u64 {
        self.add + self.sub + self.mul + self.div
    }
}

/// double double
pub const DD_ADD: OpCost = OpCost { add: 8, sub: 12, mul: 0, div: 0 }; // Σ 20
pub const DD_MUL: OpCost = OpCost { add: 5, sub: 9, mul: 9, div: 0 }; // Σ 23
pub const DD_DIV: OpCost = OpCost { add: 33, sub: 18, mul: 16, div: 3 }; // Σ 70
/// quad double
pub const QD_ADD: OpCost = OpCost { add: 35, sub: 54, mul: 0, div: 0 }; // Σ 89
pub const QD_MUL: OpCost = OpCost { add: 99, sub: 164, mul: 73, div: 0 }; // Σ 336
pub const QD_DIV: OpCost = OpCost { add: 266, sub: 510, mul: 112, div: 5 }; // Σ 893
/// octo double
pub const OD_ADD: OpCost = OpCost { add: 95, sub: 174, mul: 0, div: 0 }; // Σ 269
pub const OD_MUL: OpCost = OpCost { add: 529, sub: 954, mul: 259, div: 0 }; // Σ 1742
pub const OD_DIV: OpCost = OpCost { add: 1599, sub: 3070, mul: 448, div: 9 }; // Σ 5126

const D_ONE: OpCost = OpCost { add: 0, sub: 0, mul: 1, div: 0 };

/// The full cost row for `(m, op)`. Plain doubles cost one flop each.
pub fn op_cost_row(m: Precision, op: OpKind) -> OpCost {
    match (m, op) {
        (Precision::D, _) => D_ONE,
        (Precision::Dd, OpKind::Add) => DD_ADD,
        (Precision::Dd, OpKind::Mul) => DD_MUL,
        (Precision::Dd, OpKind::Div) => DD_DIV,
        (Precision::Qd, OpKind::Add) => QD_ADD,
        (Precision::Qd, OpKind::Mul) => QD_MUL,
        (Precision::Qd, OpKind::Div) => QD_DIV,
        (Precision::Od, OpKind::Add) => OD_ADD,
        (Precision::Od, OpKind::Mul) => OD_MUL,
        (Precision::Od, OpKind::Div) => OD_DIV,
    }
}

/// Base-double flop count (the Σ column) of one multiple-double operation.
pub fn op_cost(m: Precision, op: OpKind) -> u64 {
    op_cost_row(m, op).total()
}

/// Mean of the three Σ values for a precision level: the predicted cost
/// overhead factor relative to plain doubles.
pub fn average_overhead(m: Precision) -> f64 {
    let sum = op_cost(m, OpKind::Add) + op_cost(m, OpKind::Mul) + op_cost(m, OpKind::Div);
    sum as f64 / 3.0
}

/// Square roots are costed as one division plus two multiplications of the
/// same precision; tracked separately so reports can exclude them.
pub fn sqrt_cost(m: Precision) -> u64 {
    op_cost(m, OpKind::Div) + 2 * op_cost(m, OpKind::Mul)
}

/// Tally of multiple-double operations executed by a kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub add: u64,
    pub sub: u64,
    pub mul: u64,
    pub div: u64,
    pub sqrt: u64,
}

impl OpCounts {
    pub fn merge(&mut self, other: &OpCounts) {
        self.add += other.add;
        self.sub += other.sub;
        self.mul += other.mul;
        self.div += other.div;
        self.sqrt += other.sqrt;
    }

    pub fn is_empty(&self) -> bool {
        *self == OpCounts::default()
    }

    /// Convert to base-double flops at precision `m`.
    /// Subtractions are costed as additions.
    pub fn flops(&self, m: Precision) -> u64 {
        (self.add + self.sub) * op_cost(m, OpKind::Add)
            + self.mul * op_cost(m, OpKind::Mul)
            + self.div * op_cost(m, OpKind::Div)
            + self.sqrt * sqrt_cost(m)
    }
}

/// Accumulated counts, elapsed time, and bytes moved for one stage label.
#[derive(Debug, Clone)]
pub struct StageEntry {
    pub precision: Precision,
    pub counts: OpCounts,
    pub time_ms: f64,
    pub bytes: u64,
}

impl StageEntry {
    pub fn flops(&self) -> u64 {
        self.counts.flops(self.precision)
    }
}

/// Per-stage flop accounting for one algorithm run. Stages keep their
/// first-seen order.
#[derive(Debug, Clone, Default)]
pub struct FlopLedger {
    stages: Vec<(String, StageEntry)>,
}

/// One line of a ledger report.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: String,
    pub precision: Precision,
    pub time_ms: f64,
    pub counts: OpCounts,
    pub flops: u64,
    /// Absent when no time was measured for the stage.
    pub gigaflops: Option<f64>,
    /// flops per byte moved; absent when no bytes were recorded.
    pub intensity: Option<f64>,
}

impl FlopLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, stage: &str, m: Precision, counts: OpCounts, time_ms: f64, bytes: u64) {
        match self.stages.iter_mut().find(|(s, _)| s == stage) {
            Some((_, e)) => {
                assert_eq!(e.precision, m, "stage {stage} recorded at two precisions");
                e.counts.merge(&counts);
                e.time_ms += time_ms;
                e.bytes += bytes;
            }
            None => self.stages.push((
                stage.to_string(),
                StageEntry { precision: m, counts, time_ms, bytes },
            )),
        }
    }

    pub fn merge(&mut self, other: &FlopLedger) {
        for (stage, e) in &other.stages {
            self.record(stage, e.precision, e.counts, e.time_ms, e.bytes);
        }
    }

    pub fn stages(&self) -> impl Iterator<Item = (&str, &StageEntry)> {
        self.stages.iter().map(|(s, e)| (s.as_str(), e))
    }

    pub fn stage(&self, name: &str) -> Option<&StageEntry> {
        self.stages.iter().find(|(s, _)| s == name).map(|(_, e)| e)
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn total_flops(&self) -> u64 {
        self.stages.iter().map(|(_, e)| e.flops()).sum()
    }

    pub fn total_time_ms(&self) -> f64 {
        self.stages.iter().map(|(_, e)| e.time_ms).sum()
    }

    pub fn report(&self) -> Vec<StageReport> {
        self.stages
            .iter()
            .map(|(stage, e)| {
                let flops = e.flops();
                StageReport {
                    stage: stage.clone(),
                    precision: e.precision,
                    time_ms: e.time_ms,
                    counts: e.counts,
                    flops,
                    gigaflops: (e.time_ms > 0.0).then(|| flops as f64 / (e.time_ms * 1e6)),
                    intensity: (e.bytes > 0).then(|| flops as f64 / e.bytes as f64),
                }
            })
            .collect()
    }

    /// CSV with a fixed column order shared by all run modes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.report() {
            out.push_str(&format!(
                "{},{},{:.3},{},{},{},{},{},{}\n",
                r.stage,
                r.precision,
                r.time_ms,
                r.counts.add + r.counts.sub,
                r.counts.mul,
                r.counts.div,
                r.flops,
                r.gigaflops.map(|g| format!("{g:.4}")).unwrap_or_default(),
                r.intensity.map(|i| format!("{i:.4}")).unwrap_or_default(),
            ));
        }
        out
    }
}

/// Bytes are counted once per operand per kernel: 8·m per element, doubled
/// for complex data (see each kernel's byte computation).
pub const CSV_HEADER: &str = "stage,precision,time_ms,md_add,md_mul,md_div,flops,gigaflops,intensity";

impl fmt::Display for FlopLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.report() {
            writeln!(
                f,
                "{:>24}  {:>10.3} ms  {:>16} flops  {}",
                r.stage,
                r.time_ms,
                r.flops,
                r.gigaflops.map(|g| format!("{g:8.3} Gflop/s")).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Precision::*;

    #[test]
    fn table_sums() {
        assert_eq!(op_cost(Dd, OpKind::Add), 20);
        assert_eq!(op_cost(Dd, OpKind::Mul), 23);
        assert_eq!(op_cost(Dd, OpKind::Div), 70);
        assert_eq!(op_cost(Qd, OpKind::Add), 89);
        assert_eq!(op_cost(Qd, OpKind::Mul), 336);
        assert_eq!(op_cost(Qd, OpKind::Div), 893);
        assert_eq!(op_cost(Od, OpKind::Add), 269);
        assert_eq!(op_cost(Od, OpKind::Mul), 1742);
        assert_eq!(op_cost(Od, OpKind::Div), 5126);
        // spot check of a full row: dd div = 33 + 18 + 16 + 3
        assert_eq!(DD_DIV.total(), 33 + 18 + 16 + 3);
        for m in [Dd, Qd, Od] {
            for op in [OpKind::Add, OpKind::Mul, OpKind::Div] {
                assert_eq!(op_cost_row(m, op).total(), op_cost(m, op));
            }
        }
        // plain doubles cost one flop per operation
        assert_eq!(op_cost(D, OpKind::Add), 1);
        assert_eq!(op_cost(D, OpKind::Mul), 1);
        assert_eq!(op_cost(D, OpKind::Div), 1);
    }

    #[test]
    fn overhead_averages() {
        assert!((average_overhead(Dd) - 37.7).abs() <= 0.05);
        assert!((average_overhead(Qd) - 439.3).abs() <= 0.05);
        assert!((average_overhead(Od) - 2379.0).abs() <= 0.05);
    }

    #[test]
    fn ledger_rates() {
        let mut l = FlopLedger::new();
        // 10^9 base flops in 1000 ms -> 1.0 gigaflops
        let counts = OpCounts { mul: 1_000_000_000 / 336, add: 0, sub: 0, div: 0, sqrt: 0 };
        l.record("s", Qd, counts, 1000.0, 100);
        let r = &l.report()[0];
        assert!((r.gigaflops.unwrap() - (counts.mul * 336) as f64 / 1e9).abs() < 1e-9);
        // zero elapsed time -> absent rate, not infinite
        let mut l2 = FlopLedger::new();
        l2.record("t", Dd, counts, 0.0, 0);
        let r2 = &l2.report()[0];
        assert!(r2.gigaflops.is_none());
        assert!(r2.intensity.is_none());
        // empty ledger -> empty report
        assert!(FlopLedger::new().report().is_empty());
    }

    #[test]
    fn ledger_additivity() {
        let mut a = FlopLedger::new();
        a.record("x", Qd, OpCounts { add: 3, mul: 5, ..Default::default() }, 1.0, 10);
        let mut b = FlopLedger::new();
        b.record("x", Qd, OpCounts { add: 7, div: 2, ..Default::default() }, 2.0, 20);
        b.record("y", Qd, OpCounts { sub: 1, ..Default::default() }, 0.5, 5);
        let mut m = a.clone();
        m.merge(&b);
        let x = m.stage("x").unwrap();
        assert_eq!(x.counts, OpCounts { add: 10, mul: 5, div: 2, ..Default::default() });
        assert_eq!(m.total_flops(), a.total_flops() + b.total_flops());
    }

    #[test]
    fn pure_mul_kernel_costs_exactly() {
        let mut l = FlopLedger::new();
        let k = 1234;
        l.record("mulonly", Od, OpCounts { mul: k, ..Default::default() }, 1.0, 8);
        assert_eq!(l.total_flops(), k * op_cost(Od, OpKind::Mul));
    }
}
