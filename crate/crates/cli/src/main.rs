#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpg_core::allocate::{self, AllocationError};
use dpg_core::config::ToolConfig;
use dpg_core::formats;
use dpg_core::mining;
use dpg_core::orchestrate::{self, GeneratorSpec};
use dpg_core::predict::{self, PipelineError};
use dpg_core::simulate::{self, SimulationError, SimulationScenario};
use dpg_core::stats;

/// Defect-prediction guided test generation.
///
/// Typical pipeline: `predict` a repository, `allocate` a budget over the
/// resulting scores, then `run` the generator under that allocation.
#[derive(Debug, Parser)]
#[command(name = "dpg", version, about, long_about = None)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for output files; overrides `output_root` in the config.
    #[arg(long, global = true, value_name = "PATH")]
    output_root: Option<PathBuf>,
    /// Suppress progress and summary output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine a git repository and score every component.
    Predict {
        repo: PathBuf,
    },
    /// Split a time budget across the components of a scores.csv.
    Allocate(AllocateArgs),
    /// Run the configured generator once per row of an allocation.csv.
    Run {
        allocation: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Floor every budget to whole seconds, giving the residue to rank 1.
        #[arg(long)]
        round_whole_seconds: bool,
    },
    /// Compare allocation strategies on a synthetic project.
    Simulate {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Mann-Whitney U and Vargha-Delaney A12 for two samples.
    Stats {
        x: PathBuf,
        y: PathBuf,
    },
}

#[derive(Debug, Args)]
struct AllocateArgs {
    scores: PathBuf,
    /// Total budget T in seconds.
    #[arg(long, conflicts_with = "per_class_budget", required_unless_present = "per_class_budget")]
    total_budget: Option<f64>,
    /// Budget per component b; the total is b times the component count.
    #[arg(long)]
    per_class_budget: Option<f64>,
    /// Seconds already spent by the predictor (see t_dp.txt).
    #[arg(long, value_name = "SECONDS")]
    t_dp: Option<f64>,
    /// Minimum budget per component in single-tier mode.
    #[arg(long, value_name = "SECONDS")]
    min_budget: Option<f64>,
    /// Use the single-tier allocator even if tiers are enabled in the config.
    #[arg(long)]
    single_tier: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Self {
        Self { code: 2, message: message.to_string() }
    }

    fn input(message: impl Display) -> Self {
        Self { code: 3, message: message.to_string() }
    }

    fn infeasible(message: impl Display) -> Self {
        Self { code: 4, message: message.to_string() }
    }
}

impl From<AllocationError> for Failure {
    fn from(e: AllocationError) -> Self {
        match e {
            AllocationError::BudgetInfeasible { .. } | AllocationError::DegenerateTier { .. } => Failure::infeasible(e),
            AllocationError::InvalidParams(_) => Failure::usage(e),
            _ => Failure::input(e),
        }
    }
}

struct Context {
    config: ToolConfig,
    output_root: PathBuf,
    quiet: bool,
}

impl Context {
    fn say(&self, line: impl Display) {
        if !self.quiet {
            eprintln!("{line}");
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.output_root)
            .map_err(|e| Failure::input(format!("cannot create {}: {e}", self.output_root.display())))?;
        let path = self.output_root.join(name);
        fs::write(&path, contents).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
        self.say(format!("wrote {}", path.display()));
        Ok(path)
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => ToolConfig::load(path).map_err(Failure::usage)?,
        None => ToolConfig::default(),
    };
    let output_root = cli.output_root.clone().unwrap_or_else(|| config.output_root.clone());
    let ctx = Context { config, output_root, quiet: cli.quiet };
    match cli.command {
        Command::Predict { repo } => cmd_predict(&ctx, &repo),
        Command::Allocate(args) => cmd_allocate(&ctx, &args),
        Command::Run { allocation, parallelism, round_whole_seconds } => {
            cmd_run(&ctx, &allocation, parallelism, round_whole_seconds)
        }
        Command::Simulate { scenario, seed } => cmd_simulate(&ctx, &scenario, seed),
        Command::Stats { x, y } => cmd_stats(&x, &y),
    }
}

fn cmd_predict(ctx: &Context, repo: &Path) -> Result<(), Failure> {
    let result = predict::predict_repository(repo, &ctx.config.mining, &ctx.config.schwa).map_err(|e| match e {
        PipelineError::Mining(mining::MiningError::InvalidConfig(_)) => Failure::usage(e),
        PipelineError::Predict(predict::PredictError::InvalidParams(_)) => Failure::usage(e),
        _ => Failure::input(e),
    })?;
    ctx.write("scores.csv", &formats::scores_to_csv(&result.prediction.scores))?;
    ctx.write("histories.json", &mining::histories_to_json(&result.histories))?;
    ctx.write("t_dp.txt", &format!("{}\n", result.predictor_seconds))?;
    ctx.say(format!(
        "scored {} components in {:.3} s",
        result.prediction.scores.len(),
        result.prediction.elapsed.as_secs_f64()
    ));
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::usage(format!("--{name} must be a positive number")))
    }
}

fn cmd_allocate(ctx: &Context, args: &AllocateArgs) -> Result<(), Failure> {
    let scores = formats::scores_from_csv(&read_input(&args.scores)?).map_err(Failure::input)?;
    if scores.is_empty() {
        return Err(Failure::input(format!("{} has no components", args.scores.display())));
    }
    let total = match (args.total_budget, args.per_class_budget) {
        (Some(t), None) => positive("total-budget", t)?,
        (None, Some(b)) => positive("per-class-budget", b)? * scores.len() as f64,
        _ => return Err(Failure::usage("give exactly one of --total-budget and --per-class-budget")),
    };
    let overhead = args.t_dp.unwrap_or(ctx.config.bads.predictor_overhead);
    if !(overhead >= 0.0) {
        return Err(Failure::usage("--t-dp must be >= 0"));
    }
    let mut settings = ctx.config.allocation_settings(scores.len(), total, overhead);
    if let Some(min) = args.min_budget {
        if !(min >= 0.0) {
            return Err(Failure::usage("--min-budget must be >= 0"));
        }
        settings.bads.min_budget = min;
    }
    let plan = match settings.tiers.filter(|_| !args.single_tier) {
        Some(tiers) => allocate::allocate_two_tier(&scores, &settings.bads, &tiers)?,
        None => allocate::allocate_single_tier(&scores, &settings.bads)?,
    };
    for warning in &plan.warnings {
        ctx.say(format!("warning: {warning}"));
    }
    ctx.write("allocation.csv", &formats::allocation_to_csv(&plan))?;
    ctx.say(format!("allocated {:.4} s over {} components", plan.allocated, plan.len()));
    Ok(())
}

fn cmd_run(ctx: &Context, allocation: &Path, parallelism: usize, whole_seconds: bool) -> Result<(), Failure> {
    let rows = formats::allocation_from_csv(&read_input(allocation)?).map_err(Failure::input)?;
    if rows.is_empty() {
        return Err(Failure::usage(format!("{} has no rows", allocation.display())));
    }
    if ctx.config.generator.command.is_empty() {
        return Err(Failure::usage("no generator.command configured"));
    }
    let mut spec: GeneratorSpec = ctx.config.generator.clone();
    if spec.output_dir.is_relative() {
        spec.output_dir = ctx.output_root.join(&spec.output_dir);
    }
    let mut schedule = formats::schedule_from_rows(&rows);
    if whole_seconds {
        schedule = allocate::round_schedule(schedule);
    }
    let outcomes = orchestrate::run_schedule(&schedule, &spec, parallelism).map_err(Failure::usage)?;
    ctx.write("runs.json", &orchestrate::outcomes_to_json(&outcomes))?;
    let summary = orchestrate::summarize_runs(&outcomes);
    let (ok, nonzero, timed_out, spawn_failed) = summary.counts();
    ctx.say(format!(
        "ok={ok} nonzero={nonzero} timed_out={timed_out} spawn_failed={spawn_failed} wall={:.1}s",
        summary.total_wall_seconds
    ));
    Ok(())
}

fn cmd_simulate(ctx: &Context, path: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut scenario: SimulationScenario =
        serde_json::from_str(&read_input(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let report = simulate::compare_strategies(&scenario).map_err(|e| match e {
        SimulationError::InfeasibleScenario(_) => Failure::infeasible(e),
        SimulationError::Allocation(a) => Failure::from(a),
        _ => Failure::input(e),
    })?;
    ctx.write("report.json", &report.to_json())?;
    ctx.write("report.csv", &report.to_csv())?;
    for s in &report.strategies {
        ctx.say(format!("{}: mean={:.2} median={:.1} detected={}", s.strategy.name(), s.mean, s.median, s.bugs_detected));
    }
    for c in &report.comparisons {
        ctx.say(format!(
            "{} vs {}: a12={:.3} p={:.4} unique={}/{}",
            c.candidate.name(),
            c.baseline.name(),
            c.a12,
            c.p_value_two_tailed,
            c.unique_to_candidate.len(),
            c.unique_to_baseline.len()
        ));
    }
    Ok(())
}

fn cmd_stats(x: &Path, y: &Path) -> Result<(), Failure> {
    let sample = |p: &Path| -> Result<Vec<f64>, Failure> {
        formats::sample_from_text(&read_input(p)?).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
    };
    let result = stats::mann_whitney_u_two_tailed(&sample(x)?, &sample(y)?).map_err(Failure::input)?;
    println!("u={}", result.u_statistic);
    println!("p_two_tailed={}", result.p_value_two_tailed);
    println!("a12={}", result.a12);
    Ok(())
}
