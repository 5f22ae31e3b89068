#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dpg_core::mining::{ComponentHistory, Histories};
use num_rational::Ratio;

pub const DAY: i64 = 86_400;
pub const T0: i64 = 1_600_000_000;

fn git(dir: &Path, args: &[&str], author: (&str, &str), when: i64) {
    let date = format!("@{when} +0000");
    let status = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .env("GIT_AUTHOR_NAME", author.0)
        .env("GIT_AUTHOR_EMAIL", author.1)
        .env("GIT_COMMITTER_NAME", author.0)
        .env("GIT_COMMITTER_EMAIL", author.1)
        .env("GIT_AUTHOR_DATE", &date)
        .env("GIT_COMMITTER_DATE", &date)
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .status()
        .expect("git runs");
    assert!(status.success(), "git {args:?} failed");
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

const ALICE: (&str, &str) = ("Alice", "alice@example.org");
const BOB: (&str, &str) = ("Bob", "Bob@Example.org");

/// Seven commits by two authors, including a rename, a deletion, two fix
/// messages and a non-Java file.
pub fn fixture_repo() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    git(d, &["init", "-q", "-b", "main"], ALICE, T0);

    write(d, "A.java", "class A {}\n");
    write(d, "B.java", "class B {\n  int b() { return 1; }\n  int c() { return 2; }\n}\n");
    write(d, "README.md", "fixture\n");
    write(d, "Tmp.java", "class Tmp {}\n");
    git(d, &["add", "."], ALICE, T0);
    git(d, &["commit", "-q", "-m", "Initial import"], ALICE, T0);

    write(d, "A.java", "class A { int a; }\n");
    git(d, &["commit", "-q", "-am", "Add field to A"], BOB, T0 + DAY);

    write(d, "B.java", "class B {\n  int b() { return 1; }\n  int c() { return 3; }\n}\n");
    git(d, &["commit", "-q", "-am", "Fix wrong constant in B"], ALICE, T0 + 2 * DAY);

    git(d, &["mv", "B.java", "C.java"], BOB, T0 + 3 * DAY);
    git(d, &["commit", "-q", "-m", "Rename B to C"], BOB, T0 + 3 * DAY);

    write(d, "C.java", "class B {\n  int b() { return 0; }\n  int c() { return 3; }\n}\n");
    write(d, "A.java", "class A { int a = 1; }\n");
    git(d, &["commit", "-q", "-am", "Bug: off-by-one in C and A"], ALICE, T0 + 4 * DAY);

    write(d, "README.md", "fixture repo\n");
    write(d, "D.java", "class D {}\n");
    git(d, &["add", "."], BOB, T0 + 5 * DAY);
    git(d, &["commit", "-q", "-m", "Document and add D"], BOB, T0 + 5 * DAY);

    git(d, &["rm", "-q", "Tmp.java"], ALICE, T0 + 6 * DAY);
    write(d, "README.md", "fixture repo, final\n");
    git(d, &["add", "."], ALICE, T0 + 6 * DAY);
    git(d, &["commit", "-q", "-m", "Remove scratch class"], ALICE, T0 + 6 * DAY);
    tmp
}

/// Histories derived by hand from the commit script above.
pub fn fixture_expected() -> Histories {
    let t = |day: i64| T0 + day * DAY;
    let h = |revisions: &[i64], fixes: &[i64], authors: &[i64]| ComponentHistory {
        revisions: revisions.to_vec(),
        fixes: fixes.to_vec(),
        new_author_commits: authors.to_vec(),
    };
    BTreeMap::from([
        ("A.java".to_string(), h(&[t(0), t(1), t(4)], &[t(4)], &[t(0), t(1)])),
        ("C.java".to_string(), h(&[t(0), t(2), t(3), t(4)], &[t(2), t(4)], &[t(0), t(3)])),
        ("D.java".to_string(), h(&[t(5)], &[], &[t(5)])),
    ])
}

/// Executable `/bin/sh` script in `dir`.
pub fn stub(dir: &Path, name: &str, body: &str) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

/// Budgets in rank order, computed directly from the published procedure
/// without any of the library's helpers.
pub fn oracle_single_tier(probabilities: &[(String, f64)], total: f64, t_min: f64, t_dp: f64) -> Vec<(String, f64)> {
    let mut order: Vec<(String, f64)> = probabilities.to_vec();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let n = order.len();
    let mut raw = Vec::with_capacity(n);
    for i in 0..n {
        let r = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        raw.push(0.02393705 + 0.9731946 * (-10.47408 * r).exp());
    }
    let sum: f64 = raw.iter().sum();
    let spare = total - n as f64 * t_min - t_dp;
    order.into_iter().zip(raw).map(|((c, _), w)| (c, w / sum * spare + t_min)).collect()
}

/// A12 by counting pairs.
pub fn brute_a12(x: &[i64], y: &[i64]) -> Ratio<u64> {
    let mut doubled = 0u64;
    for a in x {
        for b in y {
            doubled += match a.cmp(b) {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ratio::new(doubled, 2 * (x.len() * y.len()) as u64)
}

/// Two-tailed permutation p-value of U: every split of the pooled sample
/// into groups of the original sizes, counting those at least as far from
/// the null mean as the observed one.
pub fn brute_u_test(x: &[i64], y: &[i64]) -> (f64, f64) {
    let pooled: Vec<i64> = x.iter().chain(y).copied().collect();
    let (n1, n) = (x.len(), pooled.len());
    let u_of = |mask: u32| -> f64 {
        let (g1, g2): (Vec<i64>, Vec<i64>) = {
            let mut g1 = Vec::new();
            let mut g2 = Vec::new();
            for (i, v) in pooled.iter().enumerate() {
                if mask & (1 << i) != 0 { g1.push(*v) } else { g2.push(*v) }
            }
            (g1, g2)
        };
        let a = brute_a12(&g1, &g2);
        *a.numer() as f64 / *a.denom() as f64 * (g1.len() * g2.len()) as f64
    };
    let observed = u_of((1u32 << n1) - 1);
    let mean = (n1 * (n - n1)) as f64 / 2.0;
    let distance = (observed - mean).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        total += 1;
        if (u_of(mask) - mean).abs() >= distance - 1e-9 {
            hits += 1;
        }
    }
    (observed, hits as f64 / total as f64)
}
