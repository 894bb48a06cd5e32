#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const DEVLOG_BUDGETS: [f64; 10] = [1e18, 3e18, 6e18, 1e19, 3e19, 6e19, 1e20, 3e20, 6e20, 1e21];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn scalefit<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let Output { status, stdout, stderr } =
        Command::new(env!("CARGO_BIN_EXE_scalefit")).args(args).output().expect("binary runs");
    Run {
        code: status.code().expect("exited normally"),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

pub fn budgets_arg(budgets: &[f64]) -> String {
    budgets.iter().map(|b| format!("{b:e}")).collect::<Vec<_>>().join(",")
}

/// Parses a numeric CSV, keeping only columns that parse as numbers.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// `E + (A N^-alpha + B D^-beta)^gamma`, written out independently.
pub fn law_loss(p: [f64; 6], n: f64, d: f64) -> f64 {
    let [e, a, b, alpha, beta, gamma] = p;
    e + (a * n.powf(-alpha) + b * d.powf(-beta)).powf(gamma)
}

/// Run-record CSV with one seed per point along each budget's isoFLOP.
pub fn isoflop_runs_csv<F>(budgets: &[f64], model_sizes_per_budget: usize, metric: &str, value: F) -> String
where
    F: Fn(f64, f64) -> f64,
{
    let mut s = format!("N,D,seed,{metric}\n");
    for &c in budgets {
        for i in 0..model_sizes_per_budget {
            let t = i as f64 / (model_sizes_per_budget - 1) as f64;
            let n = (c / 6.0).sqrt() * 10f64.powf(-2.0 + 4.0 * t) / 30.0;
            let d = c / (6.0 * n);
            let _ = writeln!(s, "{n:e},{d:e},0,{:e}", value(n, d));
        }
    }
    s
}

fn windows(corpus: &str, n: usize) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for line in corpus.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < n {
            continue;
        }
        for i in 0..=toks.len() - n {
            *counts.entry(toks[i..i + n].join("\u{1f}")).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// Base-2 Jensen-Shannon divergence of the corpora's n-gram frequencies,
/// computed from raw text with no shared code.
pub fn brute_force_jsd(generated: &str, real: &str, n: usize) -> f64 {
    let p = windows(generated, n);
    let q = windows(real, n);
    let tp: f64 = p.values().sum();
    let tq: f64 = q.values().sum();
    let keys: BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for k in keys {
        let pi = p.get(k).copied().unwrap_or(0.0) / tp;
        let qi = q.get(k).copied().unwrap_or(0.0) / tq;
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            kl_p += pi * (pi / m).ln();
        }
        if qi > 0.0 {
            kl_q += qi * (qi / m).ln();
        }
    }
    (0.5 * (kl_p + kl_q) / std::f64::consts::LN_2).clamp(0.0, 1.0)
}
