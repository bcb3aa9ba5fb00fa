//! Stop-at-cost: how long each heuristic needs to match the model's
//! polished greedy tour.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use csp_core::is_feasible;
use csp_ls::{LsConfig, Variant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instances::NamedInstance;
use crate::solvers::{model_greedy_ls, Model, SolveOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRecord {
    pub instance_id: String,
    pub heuristic: String,
    pub target_cost: f64,
    pub model_time_s: f64,
    pub reached: bool,
    /// Best cost when the heuristic stopped.
    pub stop_cost: f64,
    pub stop_time_s: f64,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopSummary {
    pub heuristic: String,
    pub instances: usize,
    pub reached: usize,
    pub reach_rate: f64,
    /// Over instances where the target was reached; empty when none was.
    pub mean_stop_time_s: Option<f64>,
    pub mean_model_time_s: f64,
}

/// `target_override` replaces every model target (a test hook).
pub fn stop_at_cost(
    instances: &[NamedInstance],
    heuristics: &[Variant],
    model: &Model,
    opts: &SolveOptions,
    target_override: Option<f64>,
) -> Result<Vec<StopRecord>> {
    let per_instance = |named: &NamedInstance| -> Result<Vec<StopRecord>> {
        let inst = &named.instance;
        let t0 = Instant::now();
        let tour = model_greedy_ls(inst, model).with_context(|| format!("model on {}", named.id))?;
        let model_time_s = if opts.timing { t0.elapsed().as_secs_f64() } else { 0.0 };
        if !is_feasible(inst, &tour)? {
            bail!("model produced an infeasible tour on {}", named.id);
        }
        let target = target_override.unwrap_or_else(|| csp_core::cycle_length(inst, tour.order()));
        heuristics
            .iter()
            .map(|&h| {
                let cfg = LsConfig {
                    target_cost: Some(target),
                    ..opts.ls_config(inst)
                };
                let run = csp_ls::solve(inst, h, &cfg)?;
                if !is_feasible(inst, &run.tour)? {
                    bail!("{} produced an infeasible tour on {}", h.name(), named.id);
                }
                Ok(StopRecord {
                    instance_id: named.id.clone(),
                    heuristic: h.name().to_string(),
                    target_cost: target,
                    model_time_s,
                    reached: run.reached_target,
                    stop_cost: run.cost,
                    stop_time_s: if opts.timing { run.elapsed_s } else { 0.0 },
                    iterations: run.iterations,
                    seed: cfg.seed,
                })
            })
            .collect()
    };
    let nested: Vec<Vec<StopRecord>> = if opts.timing {
        instances.iter().map(per_instance).collect::<Result<_>>()?
    } else {
        instances.par_iter().map(per_instance).collect::<Result<_>>()?
    };
    Ok(nested.into_iter().flatten().collect())
}

pub fn summarize_stops(records: &[StopRecord]) -> Vec<StopSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.heuristic.as_str()) {
            names.push(&r.heuristic);
        }
    }
    names
        .iter()
        .map(|&h| {
            let mine: Vec<&StopRecord> = records.iter().filter(|r| r.heuristic == h).collect();
            let hit: Vec<f64> = mine.iter().filter(|r| r.reached).map(|r| r.stop_time_s).collect();
            StopSummary {
                heuristic: h.to_string(),
                instances: mine.len(),
                reached: hit.len(),
                reach_rate: hit.len() as f64 / mine.len() as f64,
                mean_stop_time_s: (!hit.is_empty()).then(|| hit.iter().sum::<f64>() / hit.len() as f64),
                mean_model_time_s: mine.iter().map(|r| r.model_time_s).sum::<f64>() / mine.len() as f64,
            }
        })
        .collect()
}

pub fn stop_table(rows: &[StopSummary]) -> String {
    let mut s = format!(
        "{:<10}  {:>9}  {:>11}  {:>12}\n",
        "Heuristic", "Reached", "Stop time/s", "Model time/s"
    );
    for r in rows {
        let t = r.mean_stop_time_s.map_or("-".to_string(), |t| format!("{t:.4}"));
        let _ = writeln!(
            s,
            "{:<10}  {:>4}/{:<4}  {:>11}  {:>12.4}",
            r.heuristic, r.reached, r.instances, t, r.mean_model_time_s
        );
    }
    s
}
