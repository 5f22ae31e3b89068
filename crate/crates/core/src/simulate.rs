//! Seeded Monte-Carlo comparison of budget allocation strategies.
//!
//! A synthetic project places its buggy components into rank bands (top
//! 10%, 10-50%, bottom half) instead of running a real predictor. Each buggy
//! component detects with probability `p_max * (1 - exp(-t / tau))` given
//! budget `t`. Detection draws come from a counter-based ChaCha stream keyed
//! by (run, buggy component), so every strategy sees the same random
//! numbers and differs only in the budgets it hands out.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocate::{
    allocate_equal, allocate_single_tier, allocate_two_tier, AllocationError, AllocationPlan, BadsParams,
    TierParams,
};
use crate::predict::{DefectScore, TwrSums};
use crate::stats::{self, DetectionMatrix, StatsError};

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
    #[error("allocation plan does not cover the project: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Equal,
    SingleTierBads,
    TwoTierBads,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Equal => "equal",
            Strategy::SingleTierBads => "single-tier-bads",
            Strategy::TwoTierBads => "two-tier-bads",
        }
    }
}

/// Where the synthetic predictor ranks buggy components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreGenerator {
    /// Share of buggy components ranked in the top 10%.
    pub top_decile_probability: f64,
    /// Share ranked between 10% and 50%; the rest land in the bottom half.
    pub mid_band_probability: f64,
}

impl Default for ScoreGenerator {
    fn default() -> Self {
        Self { top_decile_probability: 0.52, mid_band_probability: 0.36 }
    }
}

/// Detection curve shared by all buggy components, plus per-component
/// jitter: `p_max` is drawn uniformly from `p_max ± p_max_jitter` (clamped
/// to [0, 1]) and `tau` log-normally around its median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionModel {
    pub p_max: f64,
    pub p_max_jitter: f64,
    /// Median time constant, seconds.
    pub tau: f64,
    pub tau_log_sigma: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self { p_max: 0.6, p_max_jitter: 0.4, tau: 200.0, tau_log_sigma: 1.0 }
    }
}

/// Detection curve of one buggy component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionCurve {
    pub p_max: f64,
    pub tau: f64,
}

impl DetectionCurve {
    pub fn probability(&self, budget: f64) -> f64 {
        if budget <= 0.0 {
            return 0.0;
        }
        self.p_max * -(-budget / self.tau).exp_m1()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationScenario {
    pub n_components: usize,
    pub n_buggy: usize,
    pub runs: usize,
    pub budget_per_class: f64,
    pub predictor_overhead: f64,
    pub predictor: ScoreGenerator,
    pub detection: DetectionModel,
    pub strategies: Vec<Strategy>,
    pub seed: u64,
}

impl Default for SimulationScenario {
    fn default() -> Self {
        Self {
            n_components: 300,
            n_buggy: 50,
            runs: 20,
            budget_per_class: 15.0,
            predictor_overhead: 0.0,
            predictor: ScoreGenerator::default(),
            detection: DetectionModel::default(),
            strategies: vec![Strategy::Equal, Strategy::TwoTierBads],
            seed: 1,
        }
    }
}

impl SimulationScenario {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InfeasibleScenario(m.to_string()));
        if self.n_buggy == 0 || self.n_buggy > self.n_components {
            return bad("need 0 < n_buggy <= n_components");
        }
        if self.runs == 0 {
            return bad("runs must be >= 1");
        }
        if !(self.budget_per_class > 0.0 && self.budget_per_class.is_finite()) {
            return bad("budget_per_class must be positive");
        }
        if !(self.predictor_overhead >= 0.0) {
            return bad("predictor_overhead must be >= 0");
        }
        let g = self.predictor;
        if !(g.top_decile_probability >= 0.0 && g.mid_band_probability >= 0.0)
            || g.top_decile_probability + g.mid_band_probability > 1.0 + 1e-12
        {
            return bad("band probabilities must be non-negative and sum to at most 1");
        }
        let d = self.detection;
        if !(0.0..=1.0).contains(&d.p_max) || !(d.p_max_jitter >= 0.0) || !(d.tau > 0.0) || !(d.tau_log_sigma >= 0.0) {
            return bad("detection model needs p_max in [0, 1], tau > 0 and non-negative jitter");
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required");
        }
        Ok(())
    }

    fn total_budget(&self) -> f64 {
        self.budget_per_class * self.n_components as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProject {
    /// One score per component, in rank order.
    pub scores: Vec<DefectScore<f64>>,
    /// 1-based ranks of the buggy components, ascending.
    pub buggy_ranks: Vec<usize>,
    pub curves: Vec<DetectionCurve>,
}

impl SyntheticProject {
    pub fn buggy_component(&self, bug: usize) -> &str {
        &self.scores[self.buggy_ranks[bug] - 1].component
    }
}

/// Rank slots `[start, end)` (0-based) of the top-decile, mid and bottom
/// bands.
fn band_slots(n: usize) -> [(usize, usize); 3] {
    let top = n / 10;
    let half = n / 2;
    [(0, top), (top, half), (half, n)]
}

/// Largest-remainder split of `total` by `shares`.
fn apportion(total: usize, shares: [f64; 3]) -> [usize; 3] {
    let exact = shares.map(|s| s * total as f64);
    let mut counts = exact.map(|e| e.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

pub fn generate_project(scenario: &SimulationScenario) -> Result<SyntheticProject, SimulationError> {
    scenario.validate()?;
    let n = scenario.n_components;
    let g = scenario.predictor;
    let tail_share = (1.0 - g.top_decile_probability - g.mid_band_probability).max(0.0);
    let counts = apportion(scenario.n_buggy, [g.top_decile_probability, g.mid_band_probability, tail_share]);
    let bands = band_slots(n);
    const NAMES: [&str; 3] = ["top 10%", "10-50%", "bottom 50%"];
    for ((count, (start, end)), name) in counts.iter().zip(bands).zip(NAMES) {
        if *count > end - start {
            return Err(SimulationError::InfeasibleScenario(format!(
                "{count} buggy components do not fit the {} slots of the {name} band",
                end - start
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(0);
    let mut buggy_ranks = Vec::with_capacity(scenario.n_buggy);
    for (count, (start, end)) in counts.iter().zip(bands) {
        let slots: Vec<usize> = (start..end).collect();
        buggy_ranks.extend(slots.choose_multiple(&mut rng, *count).map(|slot| slot + 1));
    }
    buggy_ranks.sort_unstable();

    let d = scenario.detection;
    let tau_dist = LogNormal::new(d.tau.ln(), d.tau_log_sigma)
        .map_err(|e| SimulationError::InfeasibleScenario(format!("tau distribution: {e}")))?;
    let curves = buggy_ranks
        .iter()
        .map(|_| {
            let p_max = if d.p_max_jitter > 0.0 {
                rng.gen_range(d.p_max - d.p_max_jitter..=d.p_max + d.p_max_jitter).clamp(0.0, 1.0)
            } else {
                d.p_max
            };
            DetectionCurve { p_max, tau: tau_dist.sample(&mut rng) }
        })
        .collect();

    // strictly decreasing probabilities so ranking reproduces the placement
    let width = n.to_string().len();
    let scores = (1..=n)
        .map(|rank| {
            let probability = 1.0 - (rank as f64 - 0.5) / n as f64;
            DefectScore {
                component: format!("Component{rank:0width$}"),
                score: -(-probability).ln_1p(),
                probability,
                twr_sums: TwrSums::default(),
            }
        })
        .collect();
    Ok(SyntheticProject { scores, buggy_ranks, curves })
}

/// Uniform draw in [0, 1) for a (run, buggy component) pair. Stream `1 + run`
/// of the seeded ChaCha generator, word offset `2 * bug`.
fn detection_draw(seed: u64, run: usize, bug: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + run as u64);
    rng.set_word_pos(2 * bug as u128);
    rng.gen::<f64>()
}

/// Samples detection outcomes for every run and buggy component.
pub fn simulate_strategy(
    project: &SyntheticProject,
    plan: &AllocationPlan<f64>,
    runs: usize,
    seed: u64,
    strategy: &str,
) -> Result<DetectionMatrix, SimulationError> {
    if plan.len() != project.scores.len() {
        return Err(SimulationError::PlanMismatch(format!(
            "plan has {} entries, project has {} components",
            plan.len(),
            project.scores.len()
        )));
    }
    let probabilities = (0..project.buggy_ranks.len())
        .map(|bug| {
            let component = project.buggy_component(bug);
            plan.budget_of(component)
                .map(|t| project.curves[bug].probability(t))
                .ok_or_else(|| SimulationError::PlanMismatch(format!("no budget for {component}")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(DetectionMatrix::from_fn(strategy, runs, probabilities.len(), |run, bug| {
        detection_draw(seed, run, bug) < probabilities[bug]
    }))
}

pub fn plan_for(strategy: Strategy, project: &SyntheticProject, scenario: &SimulationScenario) -> Result<AllocationPlan<f64>, SimulationError> {
    let total = scenario.total_budget();
    let overhead = scenario.predictor_overhead;
    let per_class = scenario.budget_per_class;
    let plan = match strategy {
        Strategy::Equal => allocate_equal(&project.scores, total, overhead)?,
        Strategy::SingleTierBads => {
            let min = TierParams::for_per_class_budget(per_class).tier2_min_budget;
            allocate_single_tier(&project.scores, &BadsParams::new(total, min, overhead))?
        }
        Strategy::TwoTierBads => allocate_two_tier(
            &project.scores,
            &BadsParams::new(total, 0.0, overhead),
            &TierParams::for_per_class_budget(per_class),
        )?,
    };
    debug_assert!(plan.conservation_error().abs() < 1e-6);
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub bugs_found: Vec<usize>,
    pub mean: f64,
    pub median: f64,
    /// Indexed like the project's buggy components.
    pub success_rates: Vec<f64>,
    /// Bugs detected in at least one run.
    pub bugs_detected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub baseline: Strategy,
    pub candidate: Strategy,
    pub unique_to_baseline: Vec<usize>,
    pub unique_to_candidate: Vec<usize>,
    pub u_statistic: f64,
    pub p_value_two_tailed: f64,
    /// A12 of the candidate's bugs-found against the baseline's.
    pub a12: f64,
}

/// Buggy components grouped by rank decile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub band: String,
    pub buggy: usize,
    /// Mean budget of the band's buggy components, per strategy.
    pub mean_budget: Vec<f64>,
    /// Mean number of the band's bugs found per run, per strategy.
    pub mean_found: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: SimulationScenario,
    /// Share of buggy components scored at probability >= 0.5.
    pub synthetic_recall: f64,
    pub buggy_components: Vec<String>,
    pub strategies: Vec<StrategyReport>,
    /// Each strategy after the first against the first.
    pub comparisons: Vec<PairComparison>,
    pub bands: Vec<BandSummary>,
}

impl ComparisonReport {
    pub fn strategy(&self, strategy: Strategy) -> Option<&StrategyReport> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Flat `strategy,run,bugs_found` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,run,bugs_found\n");
        for s in &self.strategies {
            for (run, found) in s.bugs_found.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", s.strategy.name(), run, found));
            }
        }
        out
    }
}

pub fn compare_strategies(scenario: &SimulationScenario) -> Result<ComparisonReport, SimulationError> {
    let project = generate_project(scenario)?;
    let mut plans = Vec::with_capacity(scenario.strategies.len());
    let mut matrices = Vec::with_capacity(scenario.strategies.len());
    for &strategy in &scenario.strategies {
        let plan = plan_for(strategy, &project, scenario)?;
        matrices.push(simulate_strategy(&project, &plan, scenario.runs, scenario.seed, strategy.name())?);
        plans.push(plan);
    }

    let strategies = scenario
        .strategies
        .iter()
        .zip(&matrices)
        .map(|(&strategy, m)| {
            let bugs_found = stats::bugs_found_per_run(m);
            let (mean, median) = stats::mean_median(&bugs_found);
            let success_rates = (0..m.bug_count()).map(|b| stats::success_rate(m, b)).collect::<Result<Vec<f64>, _>>()?;
            let bugs_detected = success_rates.iter().filter(|&&r| r > 0.0).count();
            Ok(StrategyReport { strategy, bugs_found, mean, median, success_rates, bugs_detected })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;

    let mut comparisons = Vec::new();
    for (i, candidate) in strategies.iter().enumerate().skip(1) {
        let baseline = &strategies[0];
        let (unique_base, unique_cand) = stats::unique_bugs(&matrices[0], &matrices[i])?;
        let as_f64 = |v: &[usize]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        let test = stats::mann_whitney_u_two_tailed(&as_f64(&candidate.bugs_found), &as_f64(&baseline.bugs_found))?;
        comparisons.push(PairComparison {
            baseline: baseline.strategy,
            candidate: candidate.strategy,
            unique_to_baseline: unique_base.into_iter().collect(),
            unique_to_candidate: unique_cand.into_iter().collect(),
            u_statistic: test.u_statistic,
            p_value_two_tailed: test.p_value_two_tailed,
            a12: test.a12,
        });
    }

    let n = scenario.n_components;
    let bands = (0..10)
        .map(|decile| {
            let members: Vec<usize> = (0..project.buggy_ranks.len())
                .filter(|&b| ((project.buggy_ranks[b] - 1) * 10) / n == decile)
                .collect();
            let mean_budget = plans
                .iter()
                .map(|plan| {
                    let total: f64 = members.iter().filter_map(|&b| plan.budget_of(project.buggy_component(b))).sum();
                    if members.is_empty() { 0.0 } else { total / members.len() as f64 }
                })
                .collect();
            let mean_found = matrices
                .iter()
                .map(|m| {
                    let hits: usize = m.rows().iter().map(|row| members.iter().filter(|&&b| row[b]).count()).sum();
                    hits as f64 / m.run_count() as f64
                })
                .collect();
            BandSummary { band: format!("{}-{}", decile * 10, decile * 10 + 10), buggy: members.len(), mean_budget, mean_found }
        })
        .collect();

    let recalled = project.buggy_ranks.iter().filter(|&&r| project.scores[r - 1].probability >= 0.5).count();
    Ok(ComparisonReport {
        scenario: scenario.clone(),
        synthetic_recall: recalled as f64 / project.buggy_ranks.len() as f64,
        buggy_components: (0..project.buggy_ranks.len()).map(|b| project.buggy_component(b).to_string()).collect(),
        strategies,
        comparisons,
        bands,
    })
}
