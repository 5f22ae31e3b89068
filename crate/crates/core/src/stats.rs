//! Statistics for comparing test-generation strategies: per-bug success
//! rates, unique bugs, the two-tailed Mann-Whitney U test and the
//! Vargha-Delaney A12 effect size.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::scalar::Scalar;

/// Largest combined sample size for which `PValueMethod::Auto` enumerates.
pub const EXACT_THRESHOLD: usize = 12;

/// Largest combined sample size accepted by `PValueMethod::Exact`.
pub const EXACT_LIMIT: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("bug index {index} out of range (matrix has {bugs} bugs)")]
    IndexOutOfRange { index: usize, bugs: usize },
    #[error("detection matrices disagree in shape: {0}")]
    ShapeMismatch(String),
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains NaN")]
    NotANumber,
    #[error("exact p-value requested for combined size {0} (limit {EXACT_LIMIT})")]
    TooLargeForExact(usize),
}

/// Run-by-bug detection outcomes of one strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionMatrix {
    pub strategy: String,
    runs: Vec<Vec<bool>>,
    bugs: usize,
}

impl DetectionMatrix {
    pub fn new(strategy: impl Into<String>, runs: Vec<Vec<bool>>) -> Result<Self, StatsError> {
        let bugs = runs.first().map_or(0, Vec::len);
        if let Some((i, row)) = runs.iter().enumerate().find(|(_, r)| r.len() != bugs) {
            return Err(StatsError::ShapeMismatch(format!("row {i} has {} columns, expected {bugs}", row.len())));
        }
        Ok(Self { strategy: strategy.into(), runs, bugs })
    }

    pub fn from_fn(strategy: impl Into<String>, runs: usize, bugs: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let runs = (0..runs).map(|r| (0..bugs).map(|b| f(r, b)).collect()).collect();
        Self { strategy: strategy.into(), runs, bugs }
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    pub fn bug_count(&self) -> usize {
        self.bugs
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.runs
    }

    pub fn detected(&self, run: usize, bug: usize) -> bool {
        self.runs[run][bug]
    }

    fn detections_of(&self, bug: usize) -> usize {
        self.runs.iter().filter(|row| row[bug]).count()
    }
}

/// Fraction of runs in which `bug` was detected; 0 for a matrix with no runs.
pub fn success_rate<T: Scalar>(matrix: &DetectionMatrix, bug: usize) -> Result<T, StatsError> {
    if bug >= matrix.bugs {
        return Err(StatsError::IndexOutOfRange { index: bug, bugs: matrix.bugs });
    }
    if matrix.runs.is_empty() {
        return Ok(T::zero());
    }
    Ok(T::count(matrix.detections_of(bug)) / T::count(matrix.run_count()))
}

/// Bugs found in at least one run of `a` and no run of `b`, and vice versa.
pub fn unique_bugs(a: &DetectionMatrix, b: &DetectionMatrix) -> Result<(BTreeSet<usize>, BTreeSet<usize>), StatsError> {
    if a.bugs != b.bugs {
        return Err(StatsError::ShapeMismatch(format!("{} bugs vs {} bugs", a.bugs, b.bugs)));
    }
    let found = |m: &DetectionMatrix| -> BTreeSet<usize> { (0..m.bugs).filter(|&j| m.detections_of(j) > 0).collect() };
    let (fa, fb) = (found(a), found(b));
    Ok((fa.difference(&fb).copied().collect(), fb.difference(&fa).copied().collect()))
}

/// Number of bugs detected in each run.
pub fn bugs_found_per_run(matrix: &DetectionMatrix) -> Vec<usize> {
    matrix.runs.iter().map(|row| row.iter().filter(|&&d| d).count()).collect()
}

fn check_sample<T: Scalar>(sample: &[T]) -> Result<(), StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    Ok(())
}

/// A12 as an exact fraction: `(#{x > y} + #{x = y} / 2) / (n1 * n2)`.
pub fn vargha_delaney_a12_exact<T: Scalar>(x: &[T], y: &[T]) -> Result<Ratio<u64>, StatsError> {
    check_sample(x)?;
    check_sample(y)?;
    let mut doubled_wins = 0_u64;
    for xi in x {
        for yj in y {
            doubled_wins += match xi.partial_cmp(yj) {
                Some(Ordering::Greater) => 2,
                Some(Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(Ratio::new(doubled_wins, 2 * x.len() as u64 * y.len() as u64))
}

/// Probability that a value drawn from `x` exceeds one drawn from `y`, ties
/// counting half.
pub fn vargha_delaney_a12<T: Scalar>(x: &[T], y: &[T]) -> Result<T, StatsError> {
    let r = vargha_delaney_a12_exact(x, y)?;
    Ok(T::count(*r.numer() as usize) / T::count(*r.denom() as usize))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Exact when `n1 + n2 <= EXACT_THRESHOLD`, normal approximation otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeResult {
    pub a12: f64,
    /// U of the first sample: its rank sum minus `n1 (n1 + 1) / 2`.
    pub u_statistic: f64,
    pub p_value_two_tailed: f64,
    pub n1: usize,
    pub n2: usize,
    pub method: PValueMethod,
    /// Every observation identical; the p-value is 1 by convention.
    pub degenerate_variance: bool,
}

/// Midranks of the pooled sample, doubled so they are integers.
fn doubled_midranks<T: Scalar>(pooled: &[T]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0_u64; pooled.len()];
    let mut tie_sizes = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share the average rank (start+1+end)/2
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        tie_sizes.push(end - start);
        start = end;
    }
    (ranks, tie_sizes)
}

/// Two-tailed exact p-value: probability, over all equally likely splits of
/// the pooled midranks, that the first group's rank sum deviates from its
/// mean at least as much as observed.
fn exact_p_value(doubled_ranks: &[u64], n1: usize, observed_doubled_sum: u64) -> f64 {
    let n = doubled_ranks.len();
    let max_sum: u64 = doubled_ranks.iter().sum();
    let width = max_sum as usize + 1;
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0_u128; width]; n1 + 1];
    ways[0][0] = 1;
    for &r in doubled_ranks {
        let r = r as usize;
        for k in (1..=n1).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let (prev, cur) = (&lower[k - 1], &mut upper[0]);
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    // doubled mean rank sum of group 1 is n1 (n + 1)
    let mean = (n1 * (n + 1)) as i128;
    let dev = (observed_doubled_sum as i128 - mean).abs();
    let (extreme, total) = ways[n1].iter().enumerate().fold((0_u128, 0_u128), |(e, t), (s, &w)| {
        let far = (s as i128 - mean).abs() >= dev;
        (e + if far { w } else { 0 }, t + w)
    });
    (extreme as f64 / total as f64).min(1.0)
}

fn normal_p_value(u: f64, n1: usize, n2: usize, tie_sizes: &[usize]) -> Option<f64> {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance = n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(variance > 0.0) {
        return None;
    }
    let mean = n1f * n2f / 2.0;
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    Some(erfc(z / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0))
}

pub fn mann_whitney_u_two_tailed<T: Scalar>(x: &[T], y: &[T]) -> Result<EffectSizeResult, StatsError> {
    mann_whitney_u_with(x, y, PValueMethod::Auto)
}

pub fn mann_whitney_u_with<T: Scalar>(x: &[T], y: &[T], method: PValueMethod) -> Result<EffectSizeResult, StatsError> {
    check_sample(x)?;
    check_sample(y)?;
    let (n1, n2) = (x.len(), y.len());
    let n = n1 + n2;
    let method = match method {
        PValueMethod::Auto if n <= EXACT_THRESHOLD => PValueMethod::Exact,
        PValueMethod::Auto => PValueMethod::Normal,
        PValueMethod::Exact if n > EXACT_LIMIT => return Err(StatsError::TooLargeForExact(n)),
        m => m,
    };

    let pooled: Vec<T> = x.iter().chain(y).copied().collect();
    let (ranks, tie_sizes) = doubled_midranks(&pooled);
    let doubled_sum: u64 = ranks[..n1].iter().sum();
    let u = (doubled_sum as f64 - (n1 * (n1 + 1)) as f64) / 2.0;
    let degenerate = tie_sizes.len() == 1;

    let p = if degenerate {
        1.0
    } else {
        match method {
            PValueMethod::Exact => exact_p_value(&ranks, n1, doubled_sum),
            _ => normal_p_value(u, n1, n2, &tie_sizes).unwrap_or(1.0),
        }
    };
    let a12 = u / (n1 * n2) as f64;
    Ok(EffectSizeResult { a12, u_statistic: u, p_value_two_tailed: p, n1, n2, method, degenerate_variance: degenerate })
}

/// Mean and median of integer-valued observations.
pub fn mean_median(values: &[usize]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<usize>() as f64 / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
    } else {
        sorted[mid] as f64
    };
    (mean, median)
}
