//! Per-update arithmetic cost: closed-form table and instrumented counts.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{JioConfig, JioNlms, NlmsFilter, OpCount, RlsFilter};
use crate::convergence::complex_normal;
use crate::error::{Error, Result};
use crate::numerics::CVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableRow {
    FullRankNlms,
    FullRankRls,
    ProposedNlms,
    MwfNlms,
    MwfRls,
    Avf,
}

impl TableRow {
    pub const ALL: [TableRow; 6] = [
        TableRow::FullRankNlms,
        TableRow::FullRankRls,
        TableRow::ProposedNlms,
        TableRow::MwfNlms,
        TableRow::MwfRls,
        TableRow::Avf,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            TableRow::FullRankNlms => "Full-rank-NLMS",
            TableRow::FullRankRls => "Full-rank-RLS",
            TableRow::ProposedNlms => "Proposed-NLMS",
            TableRow::MwfNlms => "MWF-NLMS",
            TableRow::MwfRls => "MWF-RLS",
            TableRow::Avf => "AVF",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        TableRow::ALL.into_iter().find(|r| r.label().eq_ignore_ascii_case(label))
    }

    /// `(additions, multiplications)` per update.
    ///
    /// The multistage rows sum the per-stage cost over `d = 1..=D` with
    /// stage dimension `M̄ = M − d`.
    pub fn counts(&self, m: usize, d: usize) -> (i64, i64) {
        let (m, d) = (m as i64, d as i64);
        match self {
            TableRow::FullRankNlms => (3 * m - 1, 3 * m + 2),
            TableRow::FullRankRls => (3 * (m - 1).pow(2) + m * m + 2 * m, 6 * m * m + 2 * m + 2),
            TableRow::ProposedNlms => (2 * d * m + m + 4 * d - 2, 3 * d * m + m + 3 * d + 6),
            TableRow::MwfNlms => (1..=d)
                .map(|s| m - s)
                .map(|mb| (2 * mb * mb - 3 * mb + 1, 2 * mb * mb + 5 * mb + 7))
                .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1)),
            TableRow::MwfRls => (1..=d)
                .map(|s| m - s)
                .map(|mb| (4 * (mb - 1).pow(2) + 2 * mb, 4 * mb * mb + 2 * mb + 3))
                .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1)),
            TableRow::Avf => (
                d * (m * m + 3 * (m - 1).pow(2)) - 1 + d * (5 * (m - 1) + 1) + 2 * m,
                d * (4 * m * m + 4 * m + 1) + 4 * m + 2,
            ),
        }
    }

    /// The multistage rows read as a plain `D ×` product at the first-stage
    /// dimension `M̄ = M − 1`. Other rows are unchanged.
    pub fn literal_counts(&self, m: usize, d: usize) -> (i64, i64) {
        let (mb, d64) = (m as i64 - 1, d as i64);
        match self {
            TableRow::MwfNlms => (d64 * (2 * mb * mb - 3 * mb + 1), d64 * (2 * mb * mb + 5 * mb + 7)),
            TableRow::MwfRls => (d64 * (4 * (mb - 1).pow(2) + 2 * mb), d64 * (4 * mb * mb + 2 * mb + 3)),
            _ => self.counts(m, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityRow {
    pub algorithm: &'static str,
    pub additions: u64,
    pub multiplications: u64,
}

fn check_dims(m: usize, d: usize) -> Result<()> {
    if d == 0 || d > m {
        return Err(Error::Config(format!("need M ≥ D ≥ 1, got M = {m}, D = {d}")));
    }
    Ok(())
}

fn to_row(row: TableRow, (a, mu): (i64, i64)) -> ComplexityRow {
    ComplexityRow {
        algorithm: row.label(),
        additions: a.max(0) as u64,
        multiplications: mu.max(0) as u64,
    }
}

/// Every table row at `(M, D)`.
pub fn complexity_table(m: usize, d: usize) -> Result<Vec<ComplexityRow>> {
    check_dims(m, d)?;
    Ok(TableRow::ALL.iter().map(|r| to_row(*r, r.counts(m, d))).collect())
}

/// The multistage rows under the literal product reading.
pub fn mwf_literal_rows(m: usize, d: usize) -> Result<Vec<ComplexityRow>> {
    check_dims(m, d)?;
    Ok([TableRow::MwfNlms, TableRow::MwfRls]
        .iter()
        .map(|r| to_row(*r, r.literal_counts(m, d)))
        .collect())
}

/// Instrumented counts of one steady-state update against the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountCheck {
    pub measured_adds: u64,
    pub measured_mults: u64,
    pub table_adds: u64,
    pub table_mults: u64,
}

impl CountCheck {
    pub fn exact(&self) -> bool {
        self.measured_adds == self.table_adds && self.measured_mults == self.table_mults
    }

    /// `(measured/table)` for additions and multiplications.
    pub fn ratios(&self) -> (f64, f64) {
        (
            self.measured_adds as f64 / self.table_adds.max(1) as f64,
            self.measured_mults as f64 / self.table_mults.max(1) as f64,
        )
    }

    pub fn within_ratio(&self, lo: f64, hi: f64) -> bool {
        let (a, m) = self.ratios();
        (lo..=hi).contains(&a) && (lo..=hi).contains(&m)
    }
}

/// Counts one update of the instrumented implementation of `row` at
/// `(M, D)`, after a few warm-up updates on random data so every branch is
/// taken. Only the rows with an implementation can be measured.
pub fn count_verify(row: TableRow, m: usize, d: usize) -> Result<CountCheck> {
    check_dims(m, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ (m as u64) << 8 ^ d as u64);
    let sample = |rng: &mut ChaCha8Rng| {
        let r = CVector::from_fn(m, |_, _| complex_normal(rng));
        let b = if rng.random::<bool>() { 1.0 } else { -1.0 };
        (r, num_complex::Complex64::new(b, 0.0))
    };
    let mut count = OpCount::default();
    let warm = 3;
    match row {
        TableRow::FullRankNlms => {
            let mut f = NlmsFilter::new(m, 0.1)?;
            for _ in 0..warm {
                let (r, dd) = sample(&mut rng);
                f.update_counted(&r, dd, &mut OpCount::default())?;
            }
            let (r, dd) = sample(&mut rng);
            f.update_counted(&r, dd, &mut count)?;
        }
        TableRow::FullRankRls => {
            let mut f = RlsFilter::new(m, 0.998, 1e-2)?;
            for _ in 0..warm {
                let (r, dd) = sample(&mut rng);
                f.update_counted(&r, dd, &mut OpCount::default())?;
            }
            let (r, dd) = sample(&mut rng);
            f.update_counted(&r, dd, &mut count)?;
        }
        TableRow::ProposedNlms => {
            let mut f = JioNlms::new(m, JioConfig::new(d, 0.1, 0.1))?;
            for _ in 0..warm {
                let (r, dd) = sample(&mut rng);
                f.update_counted(&r, dd, &mut OpCount::default())?;
            }
            let (r, dd) = sample(&mut rng);
            f.update_counted(&r, dd, &mut count)?;
        }
        other => {
            return Err(Error::Config(format!("no instrumented implementation for {}", other.label())));
        }
    }
    let (ta, tm) = row.counts(m, d);
    Ok(CountCheck {
        measured_adds: count.adds,
        measured_mults: count.mults,
        table_adds: ta as u64,
        table_mults: tm as u64,
    })
}
