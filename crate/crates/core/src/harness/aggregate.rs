//! Pointwise statistics across seeds.

use std::fmt;
use std::str::FromStr;

use super::{HarnessError, SeedRun};
use crate::types::RunRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Loss,
    Suboptimality,
    Correlation,
    LrError,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Loss,
        Metric::Suboptimality,
        Metric::Correlation,
        Metric::LrError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Loss => "loss",
            Metric::Suboptimality => "suboptimality",
            Metric::Correlation => "correlation",
            Metric::LrError => "lr_error",
        }
    }

    pub fn of(self, record: &RunRecord) -> Option<f64> {
        match self {
            Metric::Loss => Some(record.loss),
            Metric::Suboptimality => Some(record.suboptimality),
            Metric::Correlation => record.correlation,
            Metric::LrError => record.lr_error,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Parse(format!("unknown metric `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub iteration: usize,
    pub metric: Metric,
    pub mean: f64,
    /// `stddev / √n_seeds`; zero for a single seed.
    pub stderr: f64,
    pub stddev: f64,
    pub n_seeds: usize,
    /// Cumulative cost counters at this iteration.
    pub fn_evals: usize,
    pub sg_evals: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateResult {
    pub rows: Vec<AggregateRow>,
    pub completed_seeds: usize,
    pub failed_seeds: Vec<u64>,
}

impl AggregateResult {
    /// With one seed the spread columns are zero by convention, not measured.
    pub fn single_seed(&self) -> bool {
        self.completed_seeds == 1
    }

    pub fn series(&self, metric: Metric) -> impl Iterator<Item = &AggregateRow> {
        self.rows.iter().filter(move |r| r.metric == metric)
    }
}

/// Mean, sample standard deviation and standard error per iteration and
/// metric over the completed seeds. Rows are ordered by iteration, then metric.
pub fn aggregate(runs: &[SeedRun]) -> Result<AggregateResult, HarnessError> {
    let completed: Vec<&SeedRun> = runs.iter().filter(|r| r.completed()).collect();
    let failed_seeds = runs.iter().filter(|r| !r.completed()).map(|r| r.seed).collect();
    if completed.is_empty() {
        return Err(HarnessError::NoCompletedSeeds);
    }
    let len = completed[0].records.len();
    if completed.iter().any(|r| r.records.len() != len) {
        return Err(HarnessError::InvalidSpec(
            "completed seeds have different trace lengths".into(),
        ));
    }
    let mut rows = Vec::new();
    for t in 0..len {
        let head = &completed[0].records[t];
        for metric in Metric::ALL {
            let values: Vec<f64> = completed.iter().filter_map(|r| metric.of(&r.records[t])).collect();
            if values.is_empty() {
                continue;
            }
            let (mean, stddev) = mean_and_stddev(&values);
            let n = values.len();
            rows.push(AggregateRow {
                iteration: head.iteration,
                metric,
                mean,
                stderr: if n > 1 { stddev / (n as f64).sqrt() } else { 0.0 },
                stddev,
                n_seeds: n,
                fn_evals: head.function_evals,
                sg_evals: head.surrogate_grad_evals,
            });
        }
    }
    Ok(AggregateResult {
        rows,
        completed_seeds: completed.len(),
        failed_seeds,
    })
}

/// Sample standard deviation (`n − 1` denominator); zero for one value.
fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
