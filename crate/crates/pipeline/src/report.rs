use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::records::{DatasetRecord, StageFailure};
use crate::stages::SelectionSummary;

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub total: usize,
    pub bins: Vec<Bin>,
}

fn bin_index(score: f64) -> usize {
    (((score + 1.0) * 10.0).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Width-0.1 bins over `[-1, 1]`; each bin is `[lo, hi)` except the last,
/// which also holds 1.0. Augmented records are not counted.
pub fn report_scores(records: &[DatasetRecord]) -> Histogram {
    let mut counts = [0usize; HISTOGRAM_BINS];
    let scores: Vec<f64> = records
        .iter()
        .filter(|r| !r.augmented)
        .filter_map(|r| r.score)
        .collect();
    for s in &scores {
        counts[bin_index(*s)] += 1;
    }
    let total = scores.len();
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| Bin {
            lo: (i as f64 - 10.0) / 10.0,
            hi: (i as f64 - 9.0) / 10.0,
            count,
            proportion: if total == 0 { 0.0 } else { count as f64 / total as f64 },
        })
        .collect();
    Histogram { total, bins }
}

impl Histogram {
    pub fn render_table(&self) -> String {
        let mut out = String::from("bin            count  proportion\n");
        for b in &self.bins {
            let close = if b.hi >= 1.0 { ']' } else { ')' };
            let _ = writeln!(
                out,
                "[{:>4.1}, {:>4.1}{close}  {:>6}  {:>10.4}",
                b.lo, b.hi, b.count, b.proportion
            );
        }
        let _ = write!(out, "total          {:>6}", self.total);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageCounts {
    pub sets: usize,
    pub base: usize,
    pub generate_failed: usize,
    pub annotated: usize,
    pub annotate_failed: usize,
    pub scored: usize,
    pub unscorable: usize,
    pub selection: SelectionSummary,
    pub augment_failed: usize,
    pub train: usize,
    pub exported: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub threshold: f64,
    pub counts: StageCounts,
    /// Retained base records over scored base records.
    pub retention_rate: f64,
    pub failures: Vec<StageFailure>,
    pub histogram: Histogram,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(-1.0), 0);
        assert_eq!(bin_index(-0.95), 0);
        assert_eq!(bin_index(0.0), 10);
        assert_eq!(bin_index(0.95), 19);
        assert_eq!(bin_index(1.0), 19);
    }
}
