//! CSV and plain-text file formats exchanged between subcommands.

use serde::Deserialize;
use thiserror::Error;

use crate::allocate::{AllocationPlan, ScheduledRun};
use crate::predict::{DefectScore, TwrSums};

pub const SCORES_HEADER: &str = "component,score,probability,twr_revisions,twr_fixes,twr_authors";
pub const ALLOCATION_HEADER: &str = "component,probability,rank,normalized_rank,tier,weight,budget_seconds";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: String, expected: &'static str },
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn round6(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}

/// `scores.csv`, sorted by printed probability descending, then component.
pub fn scores_to_csv(scores: &[DefectScore<f64>]) -> String {
    let mut rows: Vec<&DefectScore<f64>> = scores.iter().collect();
    rows.sort_by(|a, b| {
        round6(b.probability)
            .total_cmp(&round6(a.probability))
            .then_with(|| a.component.cmp(&b.component))
    });
    let mut out = String::from(SCORES_HEADER);
    out.push('\n');
    for s in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            quote(&s.component),
            s.score,
            s.probability,
            s.twr_sums.revisions,
            s.twr_sums.fixes,
            s.twr_sums.authors
        ));
    }
    out
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn reader<'a>(text: &'a str, expected: &'static str) -> Result<csv::Reader<&'a [u8]>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let found = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if found != expected {
        return Err(FormatError::Header { found, expected });
    }
    Ok(rdr)
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    component: String,
    score: f64,
    probability: f64,
    twr_revisions: f64,
    twr_fixes: f64,
    twr_authors: f64,
}

pub fn scores_from_csv(text: &str) -> Result<Vec<DefectScore<f64>>, FormatError> {
    let mut rdr = reader(text, SCORES_HEADER)?;
    let mut scores = Vec::new();
    for (i, row) in rdr.deserialize::<ScoreRow>().enumerate() {
        let row = row?;
        if !(0.0..=1.0).contains(&row.probability) {
            return Err(FormatError::Row { line: i + 2, reason: format!("probability {} outside [0, 1]", row.probability) });
        }
        scores.push(DefectScore {
            component: row.component,
            score: row.score,
            probability: row.probability,
            twr_sums: TwrSums { revisions: row.twr_revisions, fixes: row.twr_fixes, authors: row.twr_authors },
        });
    }
    Ok(scores)
}

/// `allocation.csv`, rows in rank order.
pub fn allocation_to_csv(plan: &AllocationPlan<f64>) -> String {
    let mut entries: Vec<_> = plan.entries.iter().collect();
    entries.sort_by_key(|e| e.rank);
    let mut out = String::from(ALLOCATION_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&format!(
            "{},{:.6},{},{:.6},{},{:.8},{:.4}\n",
            quote(&e.component),
            e.probability,
            e.rank,
            e.normalized_rank,
            e.tier,
            e.weight,
            e.budget
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AllocationRow {
    pub component: String,
    pub probability: f64,
    pub rank: usize,
    pub normalized_rank: f64,
    pub tier: u8,
    pub weight: f64,
    pub budget_seconds: f64,
}

pub fn allocation_from_csv(text: &str) -> Result<Vec<AllocationRow>, FormatError> {
    let mut rdr = reader(text, ALLOCATION_HEADER)?;
    let mut rows = Vec::new();
    for (i, row) in rdr.deserialize::<AllocationRow>().enumerate() {
        let row = row?;
        if !(row.budget_seconds >= 0.0) {
            return Err(FormatError::Row { line: i + 2, reason: format!("negative budget {}", row.budget_seconds) });
        }
        rows.push(row);
    }
    rows.sort_by_key(|r| r.rank);
    Ok(rows)
}

pub fn schedule_from_rows(rows: &[AllocationRow]) -> Vec<ScheduledRun<f64>> {
    rows.iter()
        .map(|r| ScheduledRun { component: r.component.clone(), rank: r.rank, tier: r.tier, budget: r.budget_seconds })
        .collect()
}

/// One number per line; blank lines and `#` comments are skipped.
pub fn sample_from_text(text: &str) -> Result<Vec<f64>, FormatError> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| FormatError::Row { line: i + 1, reason: format!("not a number: {l:?}") })
        })
        .collect()
}
