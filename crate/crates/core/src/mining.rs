//! Extraction of per-component revision, fix and new-author timestamps from
//! git history.
//!
//! Commits are read through `git log` with a NUL/record-separator format so
//! that paths and messages survive verbatim. One component corresponds to
//! one source file.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default fix-detection keywords, matched case-insensitively anywhere in the
/// commit message.
pub const DEFAULT_FIX_PATTERN: &str = "(fix(e[sd])?|bug|defect|patch|fault)";

/// Default number of most recent commits analyzed.
pub const DEFAULT_WINDOW: usize = 500;

const RECORD_SEP: char = '\u{1e}';
const FIELD_SEP: char = '\u{1f}';

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("repository not found at {0}")]
    RepositoryNotFound(PathBuf),
    #[error("repository at {path} could not be read: {reason}")]
    RepositoryUnreadable { path: PathBuf, reason: String },
    #[error("repository at {0} has no commits to analyze")]
    EmptyHistory(PathBuf),
    #[error("invalid mining configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Added,
    Modified,
    Deleted,
    Renamed,
    Copied,
    TypeChanged,
    Other,
}

impl ChangeKind {
    fn from_status(status: &str) -> Self {
        match status.chars().next() {
            Some('A') => ChangeKind::Added,
            Some('M') => ChangeKind::Modified,
            Some('D') => ChangeKind::Deleted,
            Some('R') => ChangeKind::Renamed,
            Some('C') => ChangeKind::Copied,
            Some('T') => ChangeKind::TypeChanged,
            _ => ChangeKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TouchedPath {
    pub path: String,
    pub kind: ChangeKind,
    /// Previous path of a rename; only populated when renames are followed.
    pub rename_from: Option<String>,
}

/// One non-merge commit on the analyzed branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: String,
    /// Committer timestamp, seconds since the Unix epoch.
    pub timestamp: i64,
    /// Lowercased author email.
    pub author: String,
    pub message: String,
    pub touched: Vec<TouchedPath>,
}

/// The Revisions, Fixes and Authors timestamp series of one component.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentHistory {
    pub revisions: Vec<i64>,
    pub fixes: Vec<i64>,
    pub new_author_commits: Vec<i64>,
}

impl ComponentHistory {
    pub fn is_empty(&self) -> bool {
        self.revisions.is_empty() && self.fixes.is_empty() && self.new_author_commits.is_empty()
    }

    fn absorb(&mut self, other: ComponentHistory) {
        self.revisions.extend(other.revisions);
        self.fixes.extend(other.fixes);
        self.new_author_commits.extend(other.new_author_commits);
        self.revisions.sort_unstable();
        self.fixes.sort_unstable();
        self.new_author_commits.sort_unstable();
    }
}

/// Component id to history, ordered by id.
pub type Histories = BTreeMap<String, ComponentHistory>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    /// Number of most recent non-merge commits to analyze.
    pub window: usize,
    pub fix_pattern: String,
    /// File suffixes to keep; empty keeps every path.
    pub include_extensions: Vec<String>,
    pub follow_renames: bool,
    /// When false, fix commits are recorded only under `fixes` and not
    /// under `revisions`.
    pub fixes_count_as_revisions: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            fix_pattern: DEFAULT_FIX_PATTERN.to_string(),
            include_extensions: vec![".java".to_string()],
            follow_renames: true,
            fixes_count_as_revisions: true,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), MiningError> {
        if self.window == 0 {
            return Err(MiningError::InvalidConfig("window must be at least 1".into()));
        }
        FixClassifier::new(self).map(|_| ())
    }

    fn includes(&self, path: &str) -> bool {
        self.include_extensions.is_empty()
            || self.include_extensions.iter().any(|ext| path.ends_with(ext.as_str()))
    }
}

/// Compiled fix-commit matcher.
#[derive(Debug, Clone)]
pub struct FixClassifier {
    pattern: Regex,
}

impl FixClassifier {
    pub fn new(config: &MiningConfig) -> Result<Self, MiningError> {
        let pattern = RegexBuilder::new(&config.fix_pattern)
            .case_insensitive(true)
            .build()
            .map_err(|e| MiningError::InvalidConfig(format!("fix_pattern: {e}")))?;
        Ok(Self { pattern })
    }

    pub fn is_fix(&self, message: &str) -> bool {
        self.pattern.is_match(message)
    }
}

/// True iff the configured fix pattern matches `message`.
pub fn classify_fix(message: &str, config: &MiningConfig) -> Result<bool, MiningError> {
    Ok(FixClassifier::new(config)?.is_fix(message))
}

/// Reads the last `config.window` non-merge commits reachable from HEAD,
/// oldest first. Commits left without any path after extension filtering
/// are dropped.
pub fn read_commits(repo: &Path, config: &MiningConfig) -> Result<Vec<CommitRecord>, MiningError> {
    config.validate()?;
    if !repo.is_dir() {
        return Err(MiningError::RepositoryNotFound(repo.to_path_buf()));
    }
    let unreadable = |reason: String| MiningError::RepositoryUnreadable {
        path: repo.to_path_buf(),
        reason,
    };

    let probe = git(repo, &["rev-parse", "--git-dir"]).map_err(|e| unreadable(e.to_string()))?;
    if !probe.status.success() {
        return Err(MiningError::RepositoryNotFound(repo.to_path_buf()));
    }
    let head = git(repo, &["rev-parse", "--verify", "--quiet", "HEAD"])
        .map_err(|e| unreadable(e.to_string()))?;
    if !head.status.success() {
        return Err(MiningError::EmptyHistory(repo.to_path_buf()));
    }

    let format = format!("--format={RECORD_SEP}%H{FIELD_SEP}%ct{FIELD_SEP}%ae{FIELD_SEP}%B{FIELD_SEP}");
    let limit = format!("--max-count={}", config.window);
    let renames = if config.follow_renames { "--find-renames" } else { "--no-renames" };
    let output = git(
        repo,
        &["log", "--no-merges", "--no-color", "-z", "--name-status", renames, &limit, &format, "HEAD"],
    )
    .map_err(|e| unreadable(e.to_string()))?;
    if !output.status.success() {
        return Err(unreadable(String::from_utf8_lossy(&output.stderr).trim().to_string()));
    }
    let text = String::from_utf8(output.stdout).map_err(|e| unreadable(format!("non-UTF-8 log output: {e}")))?;

    let mut commits = parse_log(&text, config).map_err(unreadable)?;
    if commits.is_empty() {
        return Err(MiningError::EmptyHistory(repo.to_path_buf()));
    }
    // git lists newest first
    commits.reverse();
    Ok(commits)
}

fn git(repo: &Path, args: &[&str]) -> io::Result<std::process::Output> {
    Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["-c", "core.quotepath=off", "-c", "log.showSignature=false"])
        .args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .output()
}

fn parse_log(text: &str, config: &MiningConfig) -> Result<Vec<CommitRecord>, String> {
    let mut commits = Vec::new();
    for chunk in text.split(RECORD_SEP).filter(|c| !c.is_empty()) {
        let mut fields = chunk.splitn(5, FIELD_SEP);
        let (Some(id), Some(ts), Some(email), Some(message), Some(rest)) =
            (fields.next(), fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(format!("malformed log record: {:?}", chunk.chars().take(60).collect::<String>()));
        };
        let timestamp: i64 = ts.parse().map_err(|_| format!("bad timestamp {ts:?} in {id}"))?;
        if timestamp < 0 {
            return Err(format!("negative timestamp in {id}"));
        }

        let touched: Vec<TouchedPath> = parse_name_status(rest)?
            .into_iter()
            .filter(|t| config.includes(&t.path))
            .map(|mut t| {
                if !config.follow_renames {
                    t.rename_from = None;
                }
                t
            })
            .collect();
        if touched.is_empty() {
            continue;
        }
        commits.push(CommitRecord {
            id: id.to_string(),
            timestamp,
            author: email.trim().to_lowercase(),
            message: message.trim_end().to_string(),
            touched,
        });
    }
    Ok(commits)
}

fn parse_name_status(raw: &str) -> Result<Vec<TouchedPath>, String> {
    let mut tokens = raw
        .trim_start_matches(['\0', '\n'])
        .split('\0')
        .map(|t| t.trim_start_matches('\n'))
        .filter(|t| !t.is_empty());
    let mut touched = Vec::new();
    while let Some(status) = tokens.next() {
        let kind = ChangeKind::from_status(status);
        let first = tokens.next().ok_or_else(|| format!("status {status} without path"))?;
        match kind {
            ChangeKind::Renamed | ChangeKind::Copied => {
                let second = tokens.next().ok_or_else(|| format!("status {status} without target path"))?;
                touched.push(TouchedPath {
                    path: second.to_string(),
                    kind,
                    rename_from: (kind == ChangeKind::Renamed).then(|| first.to_string()),
                });
            }
            _ => touched.push(TouchedPath {
                path: first.to_string(),
                kind,
                rename_from: None,
            }),
        }
    }
    Ok(touched)
}

/// Folds chronological commits into per-component histories.
///
/// An author counts as new for a component the first time their id appears
/// among that component's revisions inside the analyzed window. With
/// `follow_renames`, a rename moves the accumulated history (and the set of
/// seen authors) from the old path to the new one. Deleting a path drops
/// its history, so only components present at the end of the window remain.
pub fn build_histories(commits: &[CommitRecord], config: &MiningConfig) -> Result<Histories, MiningError> {
    let classifier = FixClassifier::new(config)?;
    let mut histories = Histories::new();
    let mut authors: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();

    for commit in commits {
        let is_fix = classifier.is_fix(&commit.message);
        for touched in &commit.touched {
            if config.follow_renames {
                if let Some(old) = touched.rename_from.as_deref().filter(|old| *old != touched.path) {
                    if let Some(moved) = histories.remove(old) {
                        histories.entry(touched.path.clone()).or_default().absorb(moved);
                    }
                    if let Some(seen) = authors.remove(old) {
                        authors.entry(touched.path.clone()).or_default().extend(seen);
                    }
                }
            }

            if touched.kind == ChangeKind::Deleted {
                histories.remove(&touched.path);
                authors.remove(&touched.path);
                continue;
            }

            let history = histories.entry(touched.path.clone()).or_default();
            if !is_fix || config.fixes_count_as_revisions {
                history.revisions.push(commit.timestamp);
            }
            if is_fix {
                history.fixes.push(commit.timestamp);
            }
            if authors.entry(touched.path.clone()).or_default().insert(commit.author.clone()) {
                history.new_author_commits.push(commit.timestamp);
            }
        }
    }

    for history in histories.values_mut() {
        history.revisions.sort_unstable();
        history.fixes.sort_unstable();
        history.new_author_commits.sort_unstable();
    }
    Ok(histories)
}

/// Serializes histories as the `histories.json` document.
pub fn histories_to_json(histories: &Histories) -> String {
    let mut out = serde_json::to_string_pretty(histories).expect("histories serialize");
    out.push('\n');
    out
}

pub fn histories_from_json(text: &str) -> Result<Histories, serde_json::Error> {
    serde_json::from_str(text)
}
