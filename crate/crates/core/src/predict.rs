//! Time-weighted risk scoring of component histories.
//!
//! Each timestamp is normalized into `[0, 1]` over the analyzed window and
//! weighted by a logistic time-weighted risk curve. The per-metric sums are
//! combined linearly into a score `s`, and the defect probability is
//! `1 - exp(-s)`.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mining::{self, ComponentHistory, Histories, MiningConfig, MiningError};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum PredictError {
    #[error("timestamp {timestamp} outside analyzed window [{oldest}, {latest}]")]
    TimestampOutOfRange { timestamp: i64, oldest: i64, latest: i64 },
    #[error("project has no components to score")]
    EmptyProject,
    #[error("invalid scoring parameters: {0}")]
    InvalidParams(String),
}

/// Metric weights and time range of the scoring model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SchwaParams<T> {
    pub revisions_weight: T,
    pub fixes_weight: T,
    pub authors_weight: T,
    /// Importance given to older commits, in `[0, 1]`.
    pub time_range: T,
}

impl<T: Scalar> Default for SchwaParams<T> {
    fn default() -> Self {
        Self {
            revisions_weight: T::lit(0.25),
            fixes_weight: T::lit(0.5),
            authors_weight: T::lit(0.25),
            time_range: T::lit(0.4),
        }
    }
}

impl<T: Scalar> SchwaParams<T> {
    pub fn validate(&self) -> Result<(), PredictError> {
        let weights = [self.revisions_weight, self.fixes_weight, self.authors_weight];
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(PredictError::InvalidParams("weights must be finite and non-negative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::tolerance(T::one()) {
            return Err(PredictError::InvalidParams(format!("weights sum to {total}, expected 1")));
        }
        if !(self.time_range >= T::zero() && self.time_range <= T::one()) {
            return Err(PredictError::InvalidParams(format!("time_range {} outside [0, 1]", self.time_range)));
        }
        Ok(())
    }
}

/// Bounds of the analyzed commit window, in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeNormalization {
    pub oldest: i64,
    pub latest: i64,
}

impl TimeNormalization {
    pub fn new(oldest: i64, latest: i64) -> Option<Self> {
        (oldest <= latest).then_some(Self { oldest, latest })
    }

    /// Window spanning every timestamp present in `histories`.
    pub fn from_histories(histories: &Histories) -> Option<Self> {
        let all = histories
            .values()
            .flat_map(|h| h.revisions.iter().chain(&h.fixes).chain(&h.new_author_commits))
            .copied();
        let (lo, hi) = all.fold((i64::MAX, i64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
        Self::new(lo, hi)
    }
}

/// Maps `t` into `[0, 1]`; a zero-width window maps everything to 1.
pub fn normalize_timestamp<T: Scalar>(t: i64, norm: TimeNormalization) -> Result<T, PredictError> {
    if t < norm.oldest || t > norm.latest {
        return Err(PredictError::TimestampOutOfRange { timestamp: t, oldest: norm.oldest, latest: norm.latest });
    }
    if norm.latest == norm.oldest {
        return Ok(T::one());
    }
    // i128 keeps the span exact for any i64 pair
    let offset = (t as i128 - norm.oldest as i128) as f64;
    let span = (norm.latest as i128 - norm.oldest as i128) as f64;
    Ok(T::lit(offset / span))
}

/// Time-weighted risk of a normalized timestamp.
pub fn twr<T: Scalar>(t: T, time_range: T) -> T {
    let exponent = T::lit(-12.0) * t + T::lit(2.0) + (T::one() - time_range) * T::lit(10.0);
    T::one() / (T::one() + exponent.exp())
}

/// `1 - exp(-s)`, evaluated without cancellation for small `s`.
pub fn defect_probability<T: Scalar>(score: T) -> T {
    -(-score).exp_m1()
}

/// Sums of time-weighted risk over each metric's timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwrSums<T> {
    pub revisions: T,
    pub fixes: T,
    pub authors: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectScore<T> {
    pub component: String,
    pub score: T,
    pub probability: T,
    pub twr_sums: TwrSums<T>,
}

impl<T: Scalar> DefectScore<T> {
    /// Builds a score from precomputed metric sums.
    pub fn from_sums(component: impl Into<String>, sums: TwrSums<T>, params: &SchwaParams<T>) -> Self {
        let score = params.revisions_weight * sums.revisions
            + params.fixes_weight * sums.fixes
            + params.authors_weight * sums.authors;
        Self { component: component.into(), score, probability: defect_probability(score), twr_sums: sums }
    }
}

fn twr_sum<T: Scalar>(timestamps: &[i64], time_range: T, norm: TimeNormalization) -> Result<T, PredictError> {
    timestamps
        .iter()
        .map(|&t| normalize_timestamp(t, norm).map(|x| twr(x, time_range)))
        .sum()
}

pub fn score_component<T: Scalar>(
    component: &str,
    history: &ComponentHistory,
    params: &SchwaParams<T>,
    norm: TimeNormalization,
) -> Result<DefectScore<T>, PredictError> {
    let sums = TwrSums {
        revisions: twr_sum(&history.revisions, params.time_range, norm)?,
        fixes: twr_sum(&history.fixes, params.time_range, norm)?,
        authors: twr_sum(&history.new_author_commits, params.time_range, norm)?,
    };
    Ok(DefectScore::from_sums(component, sums, params))
}

/// Orders scores by probability descending, then component id ascending.
pub fn sort_scores<T: Scalar>(scores: &mut [DefectScore<T>]) {
    scores.sort_by(|a, b| {
        b.probability
            .partial_cmp(&a.probability)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.component.cmp(&b.component))
    });
}

#[derive(Debug, Clone)]
pub struct Prediction<T> {
    /// Sorted as by [`sort_scores`].
    pub scores: Vec<DefectScore<T>>,
    pub normalization: TimeNormalization,
    pub elapsed: Duration,
}

/// Scores every component, normalizing over the span of all timestamps in
/// `histories`.
pub fn predict_project<T: Scalar>(histories: &Histories, params: &SchwaParams<T>) -> Result<Prediction<T>, PredictError> {
    let start = Instant::now();
    if histories.is_empty() {
        return Err(PredictError::EmptyProject);
    }
    // a project whose histories are all empty still gets scored (all zero)
    let norm = TimeNormalization::from_histories(histories).unwrap_or(TimeNormalization { oldest: 0, latest: 0 });
    let mut prediction = predict_project_within(histories, params, norm)?;
    prediction.elapsed = start.elapsed();
    Ok(prediction)
}

pub fn predict_project_within<T: Scalar>(
    histories: &Histories,
    params: &SchwaParams<T>,
    norm: TimeNormalization,
) -> Result<Prediction<T>, PredictError> {
    let start = Instant::now();
    params.validate()?;
    if histories.is_empty() {
        return Err(PredictError::EmptyProject);
    }
    let mut scores = histories
        .iter()
        .map(|(id, h)| score_component(id, h, params, norm))
        .collect::<Result<Vec<_>, _>>()?;
    sort_scores(&mut scores);
    Ok(Prediction { scores, normalization: norm, elapsed: start.elapsed() })
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// Output of mining plus scoring a repository.
#[derive(Debug, Clone)]
pub struct RepositoryPrediction<T> {
    pub histories: Histories,
    pub prediction: Prediction<T>,
    /// Wall time of mining and scoring, rounded up to whole seconds.
    pub predictor_seconds: u64,
}

/// Mines `repo` and scores its components, timing the whole step.
pub fn predict_repository<T: Scalar>(
    repo: &Path,
    mining_config: &MiningConfig,
    params: &SchwaParams<T>,
) -> Result<RepositoryPrediction<T>, PipelineError> {
    let start = Instant::now();
    params.validate()?;
    let commits = mining::read_commits(repo, mining_config)?;
    let histories = mining::build_histories(&commits, mining_config)?;
    let mut prediction = predict_project(&histories, params)?;
    prediction.elapsed = start.elapsed();
    let predictor_seconds = prediction.elapsed.as_secs_f64().ceil().max(1.0) as u64;
    Ok(RepositoryPrediction { histories, prediction, predictor_seconds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalization_endpoints() {
        let norm = TimeNormalization::new(100, 200).unwrap();
        assert_eq!(normalize_timestamp::<f64>(100, norm).unwrap(), 0.0);
        assert_eq!(normalize_timestamp::<f64>(200, norm).unwrap(), 1.0);
        assert_eq!(normalize_timestamp::<f64>(150, norm).unwrap(), 0.5);
        let flat = TimeNormalization::new(7, 7).unwrap();
        assert_eq!(normalize_timestamp::<f64>(7, flat).unwrap(), 1.0);
        assert!(matches!(
            normalize_timestamp::<f64>(99, norm),
            Err(PredictError::TimestampOutOfRange { .. })
        ));
        assert!(TimeNormalization::new(2, 1).is_none());
    }

    #[test]
    fn twr_reference_values() {
        // 40-digit mpmath evaluations
        assert!(close(twr(1.0, 0.4), 0.982_013_790_037_908_4, 1e-12));
        assert!(close(twr(0.5, 0.4), 0.119_202_922_022_117_56, 1e-12));
        assert!(close(twr(0.0, 0.4), 3.353_501_304_664_781e-4, 1e-15));
    }

    #[test]
    fn score_from_sums_default_weights() {
        let sums = TwrSums { revisions: 2.0, fixes: 1.0, authors: 0.4 };
        let s = DefectScore::from_sums("c", sums, &SchwaParams::default());
        assert!(close(s.score, 1.1, 1e-12));
        assert!(close(s.probability, 0.667_128_916_301_920_4, 1e-12));

        let doubled = TwrSums { revisions: 4.0, fixes: 2.0, authors: 0.8 };
        let d = DefectScore::from_sums("c", doubled, &SchwaParams::default());
        assert!(close(d.score, 2.0 * s.score, 1e-12));
        assert!(d.probability > s.probability);
    }

    #[test]
    fn empty_history_scores_zero() {
        let norm = TimeNormalization::new(0, 10).unwrap();
        let s = score_component::<f64>("x", &ComponentHistory::default(), &SchwaParams::default(), norm).unwrap();
        assert_eq!(s.score, 0.0);
        assert_eq!(s.probability, 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(SchwaParams::<f64>::default().validate().is_ok());
        let bad = SchwaParams { fixes_weight: 0.6, ..SchwaParams::<f64>::default() };
        assert!(bad.validate().is_err());
        let bad = SchwaParams { time_range: 1.5, ..SchwaParams::<f64>::default() };
        assert!(bad.validate().is_err());
        assert!(SchwaParams::<f32>::default().validate().is_ok());
    }

    #[test]
    fn empty_project_rejected() {
        assert_eq!(
            predict_project::<f64>(&Histories::new(), &SchwaParams::default()).unwrap_err(),
            PredictError::EmptyProject
        );
    }

    #[test]
    fn single_component_project() {
        let mut h = Histories::new();
        h.insert("a.java".into(), ComponentHistory { revisions: vec![5], fixes: vec![], new_author_commits: vec![5] });
        let p = predict_project::<f64>(&h, &SchwaParams::default()).unwrap();
        assert_eq!(p.scores.len(), 1);
        // degenerate window: t normalizes to 1
        let expected = 0.25 * twr(1.0, 0.4) + 0.25 * twr(1.0, 0.4);
        assert!(close(p.scores[0].score, expected, 1e-12));
    }

    #[test]
    fn sort_order_ties_by_component() {
        let mk = |c: &str, p: f64| DefectScore {
            component: c.into(),
            score: p,
            probability: p,
            twr_sums: TwrSums::default(),
        };
        let mut v = vec![mk("b", 0.5), mk("a", 0.5), mk("c", 0.9)];
        sort_scores(&mut v);
        let ids: Vec<_> = v.iter().map(|s| s.component.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }
}
