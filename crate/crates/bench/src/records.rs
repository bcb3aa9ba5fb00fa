use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance_id: String,
    pub n: usize,
    pub spec: String,
    pub solver: String,
    pub cost: f64,
    pub feasible: bool,
    pub wall_time_s: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub solver: String,
    pub instances: usize,
    pub mean_cost: f64,
    /// Percent above the lowest mean cost.
    pub gap_pct: f64,
    pub mean_time_s: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = xs.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

/// One row per solver, in order of first appearance.
pub fn summarize(records: &[BenchRecord]) -> Vec<BenchSummary> {
    let mut solvers: Vec<&str> = Vec::new();
    for r in records {
        if !solvers.contains(&r.solver.as_str()) {
            solvers.push(&r.solver);
        }
    }
    let mut rows: Vec<BenchSummary> = solvers
        .iter()
        .map(|&s| {
            let mine = || records.iter().filter(move |r| r.solver == s);
            BenchSummary {
                solver: s.to_string(),
                instances: mine().count(),
                mean_cost: mean(mine().map(|r| r.cost)),
                gap_pct: 0.0,
                mean_time_s: mean(mine().map(|r| r.wall_time_s)),
            }
        })
        .collect();
    let best = rows.iter().map(|r| r.mean_cost).fold(f64::INFINITY, f64::min);
    for r in &mut rows {
        r.gap_pct = if best > 0.0 && r.mean_cost > best {
            (r.mean_cost - best) / best * 100.0
        } else {
            0.0
        };
    }
    rows
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut wr = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    rd.deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn summary_table(rows: &[BenchSummary]) -> String {
    let w = rows.iter().map(|r| r.solver.len()).max().unwrap_or(0).max(6);
    let mut s = format!("{:<w$}  {:>9}  {:>8}  {:>10}\n", "Solver", "Cost", "Gap", "Time/s");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<w$}  {:>9.4}  {:>7.2}%  {:>10.4}",
            r.solver, r.mean_cost, r.gap_pct, r.mean_time_s
        );
    }
    s
}

pub fn record_table(rows: &[BenchRecord]) -> String {
    let wi = rows.iter().map(|r| r.instance_id.len()).max().unwrap_or(0).max(8);
    let ws = rows.iter().map(|r| r.solver.len()).max().unwrap_or(0).max(6);
    let mut s = format!("{:<wi$}  {:<ws$}  {:>9}  {:>10}\n", "Instance", "Solver", "Cost", "Time/s");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<wi$}  {:<ws$}  {:>9.4}  {:>10.4}",
            r.instance_id, r.solver, r.cost, r.wall_time_s
        );
    }
    s
}
