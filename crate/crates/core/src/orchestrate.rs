//! Runs an external test generator once per component under its budget.
//!
//! The command template is split shell-style and spawned directly (no
//! shell), with `{component}`, `{budget_seconds}` and `{output_dir}`
//! substituted per argument. Each child gets its own process group so that a
//! timeout kills everything it started.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocate::{plan_to_schedule, AllocationPlan, Rounding, ScheduledRun};

const POLL_INTERVAL: Duration = Duration::from_millis(10);

#[derive(Debug, Error, PartialEq)]
pub enum OrchestrationError {
    #[error("invalid generator command: {0}")]
    InvalidTemplate(String),
    #[error("parallelism must be at least 1")]
    InvalidParallelism,
    #[error("cannot prepare output directory {path}: {reason}")]
    OutputDir { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Command line with `{component}`, `{budget_seconds}` and optionally
    /// `{output_dir}` placeholders.
    pub command: String,
    /// Extra time past the budget before the child is killed.
    pub grace_seconds: f64,
    pub workdir: Option<PathBuf>,
    pub env: BTreeMap<String, String>,
    /// Root for per-component output directories and logs.
    pub output_dir: PathBuf,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            command: String::new(),
            grace_seconds: 5.0,
            workdir: None,
            env: BTreeMap::new(),
            output_dir: PathBuf::from("generated"),
        }
    }
}

impl GeneratorSpec {
    pub fn new(command: impl Into<String>) -> Self {
        Self { command: command.into(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<Vec<String>, OrchestrationError> {
        for placeholder in ["{component}", "{budget_seconds}"] {
            if !self.command.contains(placeholder) {
                return Err(OrchestrationError::InvalidTemplate(format!("missing {placeholder}")));
            }
        }
        if !(self.grace_seconds >= 0.0 && self.grace_seconds.is_finite()) {
            return Err(OrchestrationError::InvalidTemplate("grace_seconds must be finite and >= 0".into()));
        }
        let argv = shell_words::split(&self.command).map_err(|e| OrchestrationError::InvalidTemplate(e.to_string()))?;
        if argv.is_empty() {
            return Err(OrchestrationError::InvalidTemplate("empty command".into()));
        }
        Ok(argv)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    /// `code` is absent when the child died from a signal.
    Nonzero { code: Option<i32> },
    TimedOut,
    SpawnFailed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub component: String,
    pub rank: usize,
    pub tier: u8,
    pub requested_budget_seconds: f64,
    pub wall_seconds: f64,
    pub exit_status: ExitStatus,
    pub output_dir: PathBuf,
    pub log_path: PathBuf,
}

/// File-name-safe form of a component path.
pub fn sanitize_component(component: &str) -> String {
    component
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// Budget as substituted into the command: integral budgets without a
/// fraction, others with up to four decimals.
pub fn format_budget(seconds: f64) -> String {
    if seconds.fract() == 0.0 {
        format!("{seconds:.0}")
    } else {
        let s = format!("{seconds:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Runs every entry of `plan` in rank order with unrounded budgets.
pub fn run_plan(plan: &AllocationPlan<f64>, spec: &GeneratorSpec, parallelism: usize) -> Result<Vec<RunOutcome>, OrchestrationError> {
    run_schedule(&plan_to_schedule(plan, Rounding::None), spec, parallelism)
}

/// Runs the schedule on a pool of `parallelism` workers. Outcomes come back
/// in rank order; a failure to spawn one component is recorded in its
/// outcome and does not stop the others.
pub fn run_schedule(
    schedule: &[ScheduledRun<f64>],
    spec: &GeneratorSpec,
    parallelism: usize,
) -> Result<Vec<RunOutcome>, OrchestrationError> {
    if parallelism == 0 {
        return Err(OrchestrationError::InvalidParallelism);
    }
    let argv = spec.validate()?;
    fs::create_dir_all(&spec.output_dir).map_err(|e| OrchestrationError::OutputDir {
        path: spec.output_dir.clone(),
        reason: e.to_string(),
    })?;

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<RunOutcome>>> = Mutex::new(vec![None; schedule.len()]);
    thread::scope(|scope| {
        for _ in 0..parallelism.min(schedule.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(run) = schedule.get(i) else { break };
                let outcome = run_one(run, spec, &argv);
                slots.lock().expect("outcome collector poisoned")[i] = Some(outcome);
            });
        }
    });

    let mut outcomes: Vec<RunOutcome> = slots
        .into_inner()
        .expect("outcome collector poisoned")
        .into_iter()
        .map(|o| o.expect("every scheduled run produces an outcome"))
        .collect();
    outcomes.sort_by_key(|o| o.rank);
    Ok(outcomes)
}

fn run_one(run: &ScheduledRun<f64>, spec: &GeneratorSpec, argv: &[String]) -> RunOutcome {
    let name = sanitize_component(&run.component);
    let output_dir = spec.output_dir.join(&name);
    let log_path = spec.output_dir.join(format!("{name}.log"));
    let mut outcome = RunOutcome {
        component: run.component.clone(),
        rank: run.rank,
        tier: run.tier,
        requested_budget_seconds: run.budget,
        wall_seconds: 0.0,
        exit_status: ExitStatus::Ok,
        output_dir: output_dir.clone(),
        log_path: log_path.clone(),
    };
    let budget = format_budget(run.budget);
    let output_dir_arg = output_dir.to_string_lossy();
    let args: Vec<String> = argv
        .iter()
        .map(|a| {
            a.replace("{component}", &run.component)
                .replace("{budget_seconds}", &budget)
                .replace("{output_dir}", &output_dir_arg)
        })
        .collect();

    let started = Instant::now();
    let child = fs::create_dir_all(&output_dir)
        .and_then(|_| File::create(&log_path))
        .and_then(|log| spawn(&args, spec, log));
    let mut child = match child {
        Ok(child) => child,
        Err(e) => {
            outcome.exit_status = ExitStatus::SpawnFailed { reason: e.to_string() };
            outcome.wall_seconds = started.elapsed().as_secs_f64();
            return outcome;
        }
    };

    let deadline = Duration::from_secs_f64((run.budget + spec.grace_seconds).max(0.0));
    outcome.exit_status = loop {
        match child.try_wait() {
            Ok(Some(status)) => {
                kill_group(&mut child);
                break if status.success() { ExitStatus::Ok } else { ExitStatus::Nonzero { code: status.code() } };
            }
            Ok(None) if started.elapsed() >= deadline => {
                kill_group(&mut child);
                let _ = child.wait();
                break ExitStatus::TimedOut;
            }
            Ok(None) => thread::sleep(POLL_INTERVAL),
            Err(_) => {
                kill_group(&mut child);
                let _ = child.wait();
                break ExitStatus::Nonzero { code: None };
            }
        }
    };
    outcome.wall_seconds = started.elapsed().as_secs_f64();
    outcome
}

fn spawn(args: &[String], spec: &GeneratorSpec, log: File) -> std::io::Result<Child> {
    let mut cmd = Command::new(&args[0]);
    cmd.args(&args[1..])
        .envs(&spec.env)
        .stdin(Stdio::null())
        .stdout(log.try_clone()?)
        .stderr(log);
    if let Some(dir) = &spec.workdir {
        cmd.current_dir(dir);
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    cmd.spawn()
}

#[cfg(unix)]
fn kill_group(child: &mut Child) {
    // the child leads its own group, so its pid is the group id
    let pgid = child.id() as libc::pid_t;
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_group(child: &mut Child) {
    let _ = child.kill();
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ok: usize,
    pub nonzero: usize,
    pub timed_out: usize,
    pub spawn_failed: usize,
    pub total_wall_seconds: f64,
    /// Per tier: total wall time over total requested budget.
    pub utilization_by_tier: BTreeMap<u8, f64>,
}

impl RunSummary {
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.ok, self.nonzero, self.timed_out, self.spawn_failed)
    }
}

pub fn summarize_runs(outcomes: &[RunOutcome]) -> RunSummary {
    let mut summary = RunSummary::default();
    let mut per_tier: BTreeMap<u8, (f64, f64)> = BTreeMap::new();
    for o in outcomes {
        match o.exit_status {
            ExitStatus::Ok => summary.ok += 1,
            ExitStatus::Nonzero { .. } => summary.nonzero += 1,
            ExitStatus::TimedOut => summary.timed_out += 1,
            ExitStatus::SpawnFailed { .. } => summary.spawn_failed += 1,
        }
        summary.total_wall_seconds += o.wall_seconds;
        let slot = per_tier.entry(o.tier).or_default();
        slot.0 += o.wall_seconds;
        slot.1 += o.requested_budget_seconds;
    }
    summary.utilization_by_tier = per_tier
        .into_iter()
        .map(|(tier, (wall, requested))| (tier, if requested > 0.0 { wall / requested } else { 0.0 }))
        .collect();
    summary
}

/// `runs.json`: the outcomes as a JSON array.
pub fn outcomes_to_json(outcomes: &[RunOutcome]) -> String {
    let mut out = serde_json::to_string_pretty(outcomes).expect("outcomes serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(status: ExitStatus, tier: u8, wall: f64, budget: f64) -> RunOutcome {
        RunOutcome {
            component: "c".into(),
            rank: 1,
            tier,
            requested_budget_seconds: budget,
            wall_seconds: wall,
            exit_status: status,
            output_dir: PathBuf::new(),
            log_path: PathBuf::new(),
        }
    }

    #[test]
    fn template_validation() {
        assert!(GeneratorSpec::new("gen {component}").validate().is_err());
        assert!(GeneratorSpec::new("gen {budget_seconds}").validate().is_err());
        assert!(GeneratorSpec::new("gen '{component} {budget_seconds}").validate().is_err());
        let argv = GeneratorSpec::new("gen --class '{component}' -t {budget_seconds}").validate().unwrap();
        assert_eq!(argv, ["gen", "--class", "{component}", "-t", "{budget_seconds}"]);
    }

    #[test]
    fn sanitizing_and_formatting() {
        assert_eq!(sanitize_component("src/main/java/a b.java"), "src_main_java_a_b.java");
        assert_eq!(format_budget(18.0), "18");
        assert_eq!(format_budget(38.436_733_5), "38.4367");
        assert_eq!(format_budget(3.5), "3.5");
    }

    #[test]
    fn summaries() {
        let s = summarize_runs(&[]);
        assert_eq!(s.counts(), (0, 0, 0, 0));

        let all_ok = [outcome(ExitStatus::Ok, 1, 1.0, 2.0), outcome(ExitStatus::Ok, 2, 1.0, 1.0)];
        assert_eq!(summarize_runs(&all_ok).timed_out, 0);

        let mixed = [
            outcome(ExitStatus::Ok, 1, 1.0, 4.0),
            outcome(ExitStatus::Ok, 1, 3.0, 4.0),
            outcome(ExitStatus::TimedOut, 2, 3.0, 2.0),
        ];
        let s = summarize_runs(&mixed);
        assert_eq!(s.counts(), (2, 0, 1, 0));
        assert_eq!(s.total_wall_seconds, 7.0);
        assert_eq!(s.utilization_by_tier[&1], 0.5);
        assert_eq!(s.utilization_by_tier[&2], 1.5);
    }

    #[test]
    fn zero_parallelism_rejected() {
        let spec = GeneratorSpec::new("true {component} {budget_seconds}");
        assert_eq!(run_schedule(&[], &spec, 0).unwrap_err(), OrchestrationError::InvalidParallelism);
    }
}
