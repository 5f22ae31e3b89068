//! Rank-based exponential time budget allocation.
//!
//! Components are ranked by defect probability, ranks are mapped onto
//! `[0, 1]` (0 = most likely defective), and each component receives a
//! weight `a + b * exp(c * r)`. After normalization the weights split
//! whatever budget is left once every component has its minimum and the
//! predictor's own running time has been paid for.
//!
//! The two-tier variant reserves most of the budget for the top-ranked
//! fraction of components and spreads the rest uniformly over the others.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predict::DefectScore;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum AllocationError {
    #[error("no components to allocate")]
    EmptyInput,
    #[error("rank {rank} outside 1..={count}")]
    RankOutOfRange { rank: usize, count: usize },
    #[error("budget infeasible{}: short by {shortfall:.4} s", tier.map(|t| format!(" in tier {t}")).unwrap_or_default())]
    BudgetInfeasible { tier: Option<u8>, shortfall: f64 },
    #[error("tier split leaves tier {tier} empty")]
    DegenerateTier { tier: u8 },
    #[error("invalid allocation parameters: {0}")]
    InvalidParams(String),
    #[error("component {0} has a non-finite defect probability")]
    InvalidProbability(String),
}

/// Shape of the weighting curve `offset + scale * exp(rate * r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ExpCurve<T> {
    pub offset: T,
    pub scale: T,
    pub rate: T,
}

impl<T: Scalar> Default for ExpCurve<T> {
    fn default() -> Self {
        Self { offset: T::lit(0.02393705), scale: T::lit(0.9731946), rate: T::lit(-10.47408) }
    }
}

impl<T: Scalar> ExpCurve<T> {
    pub fn eval(&self, normalized_rank: T) -> T {
        self.offset + self.scale * (self.rate * normalized_rank).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BadsParams<T> {
    pub curve: ExpCurve<T>,
    /// Minimum budget every component receives, seconds.
    pub min_budget: T,
    /// Total budget for the project, seconds.
    pub total_budget: T,
    /// Time already spent by the defect predictor, seconds.
    pub predictor_overhead: T,
}

impl<T: Scalar> BadsParams<T> {
    pub fn new(total_budget: T, min_budget: T, predictor_overhead: T) -> Self {
        Self { curve: ExpCurve::default(), min_budget, total_budget, predictor_overhead }
    }

    fn validate(&self) -> Result<(), AllocationError> {
        let ExpCurve { offset, scale, rate } = self.curve;
        if ![offset, scale, rate, self.min_budget, self.total_budget, self.predictor_overhead]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(AllocationError::InvalidParams("parameters must be finite".into()));
        }
        if self.min_budget < T::zero() || self.predictor_overhead < T::zero() {
            return Err(AllocationError::InvalidParams("min budget and predictor overhead must be >= 0".into()));
        }
        if self.total_budget <= T::zero() {
            return Err(AllocationError::InvalidParams("total budget must be > 0".into()));
        }
        if self.curve.eval(T::zero()) <= T::zero() || self.curve.eval(T::one()) <= T::zero() {
            return Err(AllocationError::InvalidParams("weight curve must stay positive on [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct TierParams<T> {
    /// Fraction of components (by rank) placed in tier 1.
    pub split_fraction: T,
    /// Fraction of the budget, after predictor overhead, given to tier 1.
    pub tier1_budget_fraction: T,
    pub tier1_min_budget: T,
    pub tier2_min_budget: T,
}

impl<T: Scalar> TierParams<T> {
    /// Tier minimums for a given per-component budget: the per-component
    /// budget itself for tier 1 and a fifth of it for tier 2, i.e. (15, 3)
    /// at 15 s and (30, 6) at 30 s.
    pub fn for_per_class_budget(per_class: T) -> Self {
        Self {
            split_fraction: T::lit(0.5),
            tier1_budget_fraction: T::lit(0.9),
            tier1_min_budget: per_class,
            tier2_min_budget: per_class / T::lit(5.0),
        }
    }

    fn validate(&self) -> Result<(), AllocationError> {
        let open_unit = |v: T| v > T::zero() && v < T::one();
        if !open_unit(self.split_fraction) || !open_unit(self.tier1_budget_fraction) {
            return Err(AllocationError::InvalidParams("tier fractions must lie in (0, 1)".into()));
        }
        if !(self.tier1_min_budget >= T::zero() && self.tier2_min_budget >= T::zero()) {
            return Err(AllocationError::InvalidParams("tier minimum budgets must be >= 0".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for TierParams<T> {
    fn default() -> Self {
        Self::for_per_class_budget(T::lit(15.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedComponent<T> {
    pub component: String,
    pub probability: T,
    /// 1 = most likely defective.
    pub rank: usize,
}

/// Ranks by probability descending; equal probabilities are ordered by
/// component id.
pub fn assign_rank<T: Scalar>(scores: &[DefectScore<T>]) -> Result<Vec<RankedComponent<T>>, AllocationError> {
    if scores.is_empty() {
        return Err(AllocationError::EmptyInput);
    }
    if let Some(bad) = scores.iter().find(|s| !s.probability.is_finite()) {
        return Err(AllocationError::InvalidProbability(bad.component.clone()));
    }
    let mut order: Vec<&DefectScore<T>> = scores.iter().collect();
    order.sort_by(|a, b| {
        b.probability
            .partial_cmp(&a.probability)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.component.cmp(&b.component))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, s)| RankedComponent { component: s.component.clone(), probability: s.probability, rank: i + 1 })
        .collect())
}

/// `(rank - 1) / (count - 1)`, or 0 for a single component.
pub fn normalize_rank<T: Scalar>(rank: usize, count: usize) -> Result<T, AllocationError> {
    if rank == 0 || rank > count {
        return Err(AllocationError::RankOutOfRange { rank, count });
    }
    if count == 1 {
        return Ok(T::zero());
    }
    Ok(T::count(rank - 1) / T::count(count - 1))
}

pub fn exp_weight<T: Scalar>(normalized_rank: T, curve: &ExpCurve<T>) -> T {
    curve.eval(normalized_rank)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry<T> {
    pub component: String,
    pub probability: T,
    /// Project-wide rank.
    pub rank: usize,
    /// Rank normalized within the component's tier.
    pub normalized_rank: T,
    pub raw_weight: T,
    pub weight: T,
    pub tier: u8,
    pub budget: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan<T> {
    /// In rank order.
    pub entries: Vec<AllocationEntry<T>>,
    pub total_budget: T,
    pub predictor_overhead: T,
    pub allocated: T,
    /// Non-fatal findings, e.g. tier-2 budgets below their minimum.
    pub warnings: Vec<String>,
}

impl<T: Scalar> AllocationPlan<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `allocated - (total - overhead)`; zero up to rounding for every plan
    /// this module produces.
    pub fn conservation_error(&self) -> T {
        self.allocated - (self.total_budget - self.predictor_overhead)
    }

    pub fn budget_of(&self, component: &str) -> Option<T> {
        self.entries.iter().find(|e| e.component == component).map(|e| e.budget)
    }
}

fn remaining_budget<T: Scalar>(total: T, count: usize, min_budget: T, overhead: T, tier: Option<u8>) -> Result<T, AllocationError> {
    let remaining = total - T::count(count) * min_budget - overhead;
    if remaining < -T::tolerance(total) {
        return Err(AllocationError::BudgetInfeasible { tier, shortfall: (-remaining).as_f64() });
    }
    Ok(remaining.max(T::zero()))
}

/// Exponential allocation over already-ranked components; ranks are
/// renormalized over `ranked.len()`.
fn exponential_entries<T: Scalar>(
    ranked: &[RankedComponent<T>],
    curve: &ExpCurve<T>,
    min_budget: T,
    remaining: T,
    tier: u8,
) -> Result<Vec<AllocationEntry<T>>, AllocationError> {
    let count = ranked.len();
    let normalized: Vec<T> = (1..=count).map(|k| normalize_rank(k, count)).collect::<Result<_, _>>()?;
    let raw: Vec<T> = normalized.iter().map(|&r| exp_weight(r, curve)).collect();
    let total_weight: T = raw.iter().copied().sum();
    Ok(ranked
        .iter()
        .zip(normalized)
        .zip(raw)
        .map(|((c, normalized_rank), raw_weight)| {
            let weight = raw_weight / total_weight;
            AllocationEntry {
                component: c.component.clone(),
                probability: c.probability,
                rank: c.rank,
                normalized_rank,
                raw_weight,
                weight,
                tier,
                budget: weight * remaining + min_budget,
            }
        })
        .collect())
}

/// Allocates `total - N * min - overhead` across all components by
/// normalized exponential weight, on top of the per-component minimum.
pub fn allocate_single_tier<T: Scalar>(
    scores: &[DefectScore<T>],
    params: &BadsParams<T>,
) -> Result<AllocationPlan<T>, AllocationError> {
    params.validate()?;
    let ranked = assign_rank(scores)?;
    let remaining = remaining_budget(params.total_budget, ranked.len(), params.min_budget, params.predictor_overhead, None)?;
    let entries = exponential_entries(&ranked, &params.curve, params.min_budget, remaining, 1)?;
    Ok(finish_plan(entries, params.total_budget, params.predictor_overhead, Vec::new()))
}

/// Number of components placed in tier 1: `ceil(split * count)`.
pub fn tier1_size<T: Scalar>(split_fraction: T, count: usize) -> usize {
    let exact = split_fraction * T::count(count);
    // guard against 0.3 * 10 = 3.0000000000000004 rounding up to 4
    let size = (exact - T::tolerance(exact)).ceil().to_usize().unwrap_or(count);
    size.min(count)
}

/// Two-tier allocation: tier 1 (top `ceil(split * N)` components) shares
/// `tier1_budget_fraction` of `total - overhead` exponentially, tier 2
/// shares the rest uniformly.
pub fn allocate_two_tier<T: Scalar>(
    scores: &[DefectScore<T>],
    bads: &BadsParams<T>,
    tiers: &TierParams<T>,
) -> Result<AllocationPlan<T>, AllocationError> {
    bads.validate()?;
    tiers.validate()?;
    let ranked = assign_rank(scores)?;
    let count = ranked.len();
    let effective = bads.total_budget - bads.predictor_overhead;
    if effective < -T::tolerance(bads.total_budget) {
        return Err(AllocationError::BudgetInfeasible { tier: None, shortfall: (-effective).as_f64() });
    }
    let effective = effective.max(T::zero());

    if count == 1 {
        // no second tier to fund; the lone component takes everything
        let remaining = remaining_budget(effective, 1, tiers.tier1_min_budget, T::zero(), Some(1))?;
        let entries = exponential_entries(&ranked, &bads.curve, tiers.tier1_min_budget, remaining, 1)?;
        return Ok(finish_plan(entries, bads.total_budget, bads.predictor_overhead, Vec::new()));
    }

    let n1 = tier1_size(tiers.split_fraction, count);
    if n1 == 0 {
        return Err(AllocationError::DegenerateTier { tier: 1 });
    }
    if n1 == count {
        return Err(AllocationError::DegenerateTier { tier: 2 });
    }
    let n2 = count - n1;
    let tier1_total = tiers.tier1_budget_fraction * effective;
    let tier2_total = effective - tier1_total;

    let remaining = remaining_budget(tier1_total, n1, tiers.tier1_min_budget, T::zero(), Some(1))?;
    let mut entries = exponential_entries(&ranked[..n1], &bads.curve, tiers.tier1_min_budget, remaining, 1)?;

    let mut warnings = Vec::new();
    let each = tier2_total / T::count(n2);
    if each < tiers.tier2_min_budget {
        warnings.push(format!(
            "tier-2 budget {:.4} s per component is below the tier-2 minimum {:.4} s",
            each.as_f64(),
            tiers.tier2_min_budget.as_f64()
        ));
    }
    let uniform = T::one() / T::count(n2);
    for (k, c) in ranked[n1..].iter().enumerate() {
        entries.push(AllocationEntry {
            component: c.component.clone(),
            probability: c.probability,
            rank: c.rank,
            normalized_rank: normalize_rank(k + 1, n2)?,
            raw_weight: T::one(),
            weight: uniform,
            tier: 2,
            budget: each,
        });
    }
    Ok(finish_plan(entries, bads.total_budget, bads.predictor_overhead, warnings))
}

/// Gives every component the same share of `total - overhead`.
pub fn allocate_equal<T: Scalar>(
    scores: &[DefectScore<T>],
    total_budget: T,
    predictor_overhead: T,
) -> Result<AllocationPlan<T>, AllocationError> {
    let ranked = assign_rank(scores)?;
    let effective = remaining_budget(total_budget, 0, T::zero(), predictor_overhead, None)?;
    let count = ranked.len();
    let share = T::one() / T::count(count);
    let entries = ranked
        .into_iter()
        .map(|c| AllocationEntry {
            normalized_rank: normalize_rank(c.rank, count).unwrap_or_else(|_| T::zero()),
            component: c.component,
            probability: c.probability,
            rank: c.rank,
            raw_weight: T::one(),
            weight: share,
            tier: 1,
            budget: effective * share,
        })
        .collect();
    Ok(finish_plan(entries, total_budget, predictor_overhead, Vec::new()))
}

fn finish_plan<T: Scalar>(
    entries: Vec<AllocationEntry<T>>,
    total_budget: T,
    predictor_overhead: T,
    warnings: Vec<String>,
) -> AllocationPlan<T> {
    let allocated = entries.iter().map(|e| e.budget).sum();
    AllocationPlan { entries, total_budget, predictor_overhead, allocated, warnings }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    #[default]
    None,
    WholeSeconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledRun<T> {
    pub component: String,
    pub rank: usize,
    pub tier: u8,
    pub budget: T,
}

/// Turns a plan into an execution order (rank order). With whole-second
/// rounding every budget is floored and the residue goes to the rank-1
/// component, so the total is unchanged.
pub fn plan_to_schedule<T: Scalar>(plan: &AllocationPlan<T>, rounding: Rounding) -> Vec<ScheduledRun<T>> {
    let mut runs: Vec<ScheduledRun<T>> = plan
        .entries
        .iter()
        .map(|e| ScheduledRun { component: e.component.clone(), rank: e.rank, tier: e.tier, budget: e.budget })
        .collect();
    runs.sort_by_key(|r| r.rank);
    match rounding {
        Rounding::None => runs,
        Rounding::WholeSeconds => round_schedule(runs),
    }
}

/// Floors every budget and adds the residue to the first run, keeping the
/// total. A single run is left untouched.
pub fn round_schedule<T: Scalar>(mut runs: Vec<ScheduledRun<T>>) -> Vec<ScheduledRun<T>> {
    if runs.len() > 1 {
        let total: T = runs.iter().map(|r| r.budget).sum();
        for run in &mut runs {
            run.budget = run.budget.floor();
        }
        let floored: T = runs.iter().map(|r| r.budget).sum();
        runs[0].budget = runs[0].budget + (total - floored);
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::TwrSums;

    fn scores(probs: &[(&str, f64)]) -> Vec<DefectScore<f64>> {
        probs
            .iter()
            .map(|&(c, p)| DefectScore { component: c.into(), score: p, probability: p, twr_sums: TwrSums::default() })
            .collect()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ranks_strict_and_tied() {
        let r = assign_rank(&scores(&[("x", 0.1), ("y", 0.9), ("z", 0.5)])).unwrap();
        let got: Vec<_> = r.iter().map(|c| (c.component.as_str(), c.rank)).collect();
        assert_eq!(got, [("y", 1), ("z", 2), ("x", 3)]);

        let r = assign_rank(&scores(&[("b.java", 0.4), ("a.java", 0.4)])).unwrap();
        assert_eq!(r[0].component, "a.java");
        assert_eq!(r[1].rank, 2);

        assert_eq!(assign_rank(&scores(&[("solo", 0.0)])).unwrap()[0].rank, 1);
        assert_eq!(assign_rank::<f64>(&[]).unwrap_err(), AllocationError::EmptyInput);
    }

    #[test]
    fn rank_normalization() {
        assert_eq!(normalize_rank::<f64>(1, 11).unwrap(), 0.0);
        assert_eq!(normalize_rank::<f64>(11, 11).unwrap(), 1.0);
        assert_eq!(normalize_rank::<f64>(6, 11).unwrap(), 0.5);
        assert_eq!(normalize_rank::<f64>(1, 1).unwrap(), 0.0);
        assert!(matches!(normalize_rank::<f64>(0, 3), Err(AllocationError::RankOutOfRange { .. })));
        assert!(matches!(normalize_rank::<f64>(4, 3), Err(AllocationError::RankOutOfRange { .. })));
    }

    #[test]
    fn weight_curve_values() {
        let curve = ExpCurve::default();
        assert!(close(exp_weight(0.0, &curve), 0.997_131_65, 1e-12));
        assert!(close(exp_weight(0.5, &curve), 0.029_110_522_167_295_71, 1e-12));
        assert!(close(exp_weight(1.0, &curve), 0.023_964_552_016_827_655, 1e-12));
    }

    #[test]
    fn single_tier_worked_example() {
        let plan = allocate_single_tier(
            &scores(&[("a", 0.9), ("b", 0.5), ("c", 0.1)]),
            &BadsParams::new(60.0, 5.0, 0.0),
        )
        .unwrap();
        let budgets: Vec<f64> = plan.entries.iter().map(|e| e.budget).collect();
        // 40-digit recomputation of the same steps
        let expected = [47.725_801_708_096_07, 6.247_348_229_031_755, 6.026_850_062_872_172];
        for (b, e) in budgets.iter().zip(expected) {
            assert!(close(*b, e, 1e-9), "{b} vs {e}");
        }
        assert!(close(plan.allocated, 60.0, 1e-9));
    }

    #[test]
    fn single_component_collapse() {
        let plan = allocate_single_tier(&scores(&[("a", 0.3)]), &BadsParams::new(20.0, 5.0, 2.0)).unwrap();
        assert_eq!(plan.entries[0].weight, 1.0);
        assert!(close(plan.entries[0].budget, 18.0, 1e-12));
    }

    #[test]
    fn infeasible_budget_reports_shortfall() {
        let err = allocate_single_tier(
            &scores(&[("a", 0.9), ("b", 0.5), ("c", 0.1)]),
            &BadsParams::new(10.0, 5.0, 0.0),
        )
        .unwrap_err();
        assert_eq!(err, AllocationError::BudgetInfeasible { tier: None, shortfall: 5.0 });
    }

    #[test]
    fn two_tier_worked_example() {
        let plan = allocate_two_tier(
            &scores(&[("a", 0.9), ("b", 0.7), ("c", 0.3), ("d", 0.1)]),
            &BadsParams::new(60.0, 0.0, 0.0),
            &TierParams::for_per_class_budget(15.0),
        )
        .unwrap();
        let e = &plan.entries;
        assert_eq!(e.iter().map(|x| x.tier).collect::<Vec<_>>(), [1, 1, 2, 2]);
        assert!(close(e[0].raw_weight, 0.997_131_65, 1e-9));
        assert!(close(e[1].raw_weight, 0.023_964_552_016_827_655, 1e-9));
        assert!(close(e[0].weight, 0.976_530_563_947_359_9, 1e-9));
        assert!(close(e[1].weight, 0.023_469_436_052_640_14, 1e-9));
        assert!(close(e[0].budget, 38.436_733_534_736_64, 1e-9));
        assert!(close(e[1].budget, 15.563_266_465_263_36, 1e-9));
        assert!(close(e[2].budget, 3.0, 1e-12));
        assert!(close(e[3].budget, 3.0, 1e-12));
        assert!(close(plan.allocated, 60.0, 1e-9));
        assert!(plan.warnings.is_empty());
    }

    #[test]
    fn two_tier_pair_and_odd_split() {
        let plan = allocate_two_tier(
            &scores(&[("a", 0.9), ("b", 0.1)]),
            &BadsParams::new(30.0, 0.0, 0.0),
            &TierParams::for_per_class_budget(15.0),
        )
        .unwrap();
        assert!(close(plan.entries[0].budget, 27.0, 1e-12));
        assert!(close(plan.entries[1].budget, 3.0, 1e-12));

        assert_eq!(tier1_size(0.5_f64, 5), 3);
        assert_eq!(tier1_size(0.3_f64, 10), 3);
        assert_eq!(tier1_size(0.5_f64, 4), 2);
    }

    #[test]
    fn two_tier_charges_overhead_once() {
        let plan = allocate_two_tier(
            &scores(&[("a", 0.9), ("b", 0.7), ("c", 0.3), ("d", 0.1)]),
            &BadsParams::new(80.0, 0.0, 4.0),
            &TierParams::for_per_class_budget(15.0),
        )
        .unwrap();
        assert!(close(plan.allocated, 76.0, 1e-9));
        assert!(close(plan.conservation_error(), 0.0, 1e-9));
    }

    #[test]
    fn two_tier_warns_on_thin_second_tier() {
        let tiers = TierParams { tier2_min_budget: 5.0, ..TierParams::for_per_class_budget(15.0) };
        let plan = allocate_two_tier(
            &scores(&[("a", 0.9), ("b", 0.7), ("c", 0.3), ("d", 0.1)]),
            &BadsParams::new(60.0, 0.0, 0.0),
            &tiers,
        )
        .unwrap();
        assert_eq!(plan.warnings.len(), 1);
    }

    #[test]
    fn two_tier_infeasible_first_tier() {
        let err = allocate_two_tier(
            &scores(&[("a", 0.9), ("b", 0.7), ("c", 0.3), ("d", 0.1)]),
            &BadsParams::new(30.0, 0.0, 0.0),
            &TierParams::for_per_class_budget(15.0),
        )
        .unwrap_err();
        assert!(matches!(err, AllocationError::BudgetInfeasible { tier: Some(1), .. }));
    }

    #[test]
    fn two_tier_single_component() {
        let plan = allocate_two_tier(
            &scores(&[("a", 0.9)]),
            &BadsParams::new(15.0, 0.0, 1.0),
            &TierParams::for_per_class_budget(10.0),
        )
        .unwrap();
        assert!(close(plan.entries[0].budget, 14.0, 1e-12));
    }

    #[test]
    fn equal_allocation() {
        let plan = allocate_equal(&scores(&[("a", 0.9), ("b", 0.1), ("c", 0.2)]), 45.0, 0.0).unwrap();
        assert!(plan.entries.iter().all(|e| close(e.budget, 15.0, 1e-12)));
    }

    #[test]
    fn whole_second_schedule_preserves_total() {
        let plan = allocate_two_tier(
            &scores(&[("a", 0.9), ("b", 0.7), ("c", 0.3), ("d", 0.1)]),
            &BadsParams::new(60.0, 0.0, 0.0),
            &TierParams::for_per_class_budget(15.0),
        )
        .unwrap();
        let same = plan_to_schedule(&plan, Rounding::None);
        assert_eq!(same.iter().map(|r| r.budget).collect::<Vec<_>>(), plan.entries.iter().map(|e| e.budget).collect::<Vec<_>>());

        let rounded = plan_to_schedule(&plan, Rounding::WholeSeconds);
        let total: f64 = rounded.iter().map(|r| r.budget).sum();
        assert!(close(total, 60.0, 1e-9));
        assert_eq!(rounded[1].budget, 15.0);
        assert_eq!(rounded[2].budget, 3.0);
        assert!(close(rounded[0].budget, 39.0, 1e-9));

        let solo = allocate_single_tier(&scores(&[("a", 0.3)]), &BadsParams::new(20.5, 5.0, 0.0)).unwrap();
        assert_eq!(plan_to_schedule(&solo, Rounding::WholeSeconds)[0].budget, 20.5);
    }

    #[test]
    fn works_in_single_precision() {
        let s: Vec<DefectScore<f32>> = ["a", "b", "c", "d"]
            .iter()
            .enumerate()
            .map(|(i, c)| DefectScore { component: (*c).into(), score: 0.0, probability: 1.0 - i as f32 * 0.2, twr_sums: TwrSums::default() })
            .collect();
        let plan = allocate_two_tier(&s, &BadsParams::new(60.0, 0.0, 0.0), &TierParams::for_per_class_budget(15.0)).unwrap();
        assert!((plan.entries[0].budget - 38.436_733).abs() < 1e-3);
        assert!(plan.conservation_error().abs() < 1e-4);
    }
}
