//! Destroy-and-repair local search for the covering salesman problem, plus
//! the 2-opt and redundant-city passes used to polish model tours.
//!
//! Two searches share one driver:
//!
//! * **LS1** removes a fraction of the tour, each city drawn with probability
//!   proportional to the length its removal saves, then repairs by inserting
//!   cities drawn with probability inversely proportional to their cheapest
//!   insertion cost.
//! * **LS2** removes a single uniformly drawn city and repairs from the
//!   cities nearest to the removed one: of the few nearest that cover
//!   something still uncovered, the cheapest to insert goes in.
//!
//! Every candidate is polished with redundant-city removal and 2-opt and
//! accepted when it is no longer than the current solution.

mod moves;

use std::time::Instant;

use csp_core::{cycle_length, CspInstance, Tour};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use moves::{best_two_opt_gain, IMPROVEMENT_EPS};
use moves::{two_opt_in_place, Working};

#[derive(Debug, Error)]
pub enum LsError {
    #[error("invalid local search config: {0}")]
    Config(String),
    #[error("tour is not feasible on this instance")]
    Infeasible,
    #[error(transparent)]
    Csp(#[from] csp_core::CspError),
}

pub type Result<T, E = LsError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsConfig {
    pub max_stall_iters: usize,
    pub destroy_fraction: f64,
    /// LS2 repair inserts the cheapest of this many nearest candidates.
    pub ls2_candidates: usize,
    pub seed: u64,
    pub time_limit_s: Option<f64>,
    /// Stop as soon as the best cost is at or below this value.
    pub target_cost: Option<f64>,
}

impl Default for LsConfig {
    fn default() -> Self {
        LsConfig {
            max_stall_iters: 200,
            destroy_fraction: 0.2,
            ls2_candidates: 3,
            seed: 0,
            time_limit_s: None,
            target_cost: None,
        }
    }
}

impl LsConfig {
    pub fn with_seed(seed: u64) -> Self {
        LsConfig {
            seed,
            ..LsConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.destroy_fraction > 0.0 && self.destroy_fraction <= 1.0) {
            return Err(LsError::Config(format!(
                "destroy fraction {} outside (0, 1]",
                self.destroy_fraction
            )));
        }
        if self.ls2_candidates == 0 {
            return Err(LsError::Config("LS2 needs at least one repair candidate".into()));
        }
        if self.max_stall_iters == 0 {
            return Err(LsError::Config("stall limit must be at least 1".into()));
        }
        if let Some(t) = self.time_limit_s {
            if t.is_nan() || t < 0.0 {
                return Err(LsError::Config(format!("time limit {t} must be nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Ls1,
    Ls2,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Ls1 => "ls1",
            Variant::Ls2 => "ls2",
        }
    }
}

/// A new best-so-far solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub elapsed_s: f64,
    pub best_cost: f64,
}

#[derive(Clone, Debug)]
pub struct LsRun {
    pub tour: Tour,
    pub cost: f64,
    pub iterations: usize,
    /// Iteration 0 is the polished initial solution; later points are strict
    /// improvements.
    pub trace: Vec<TracePoint>,
    pub reached_target: bool,
    pub elapsed_s: f64,
}

/// Greedy cover: while some city is uncovered, pick one at random and add
/// the candidate (the city itself or any city covering it) that covers the
/// most uncovered cities, lower index first. The chosen cities are then
/// ordered by nearest neighbour from the first one.
pub fn initial_solution<R: Rng>(inst: &CspInstance, rng: &mut R) -> Tour {
    let n = inst.n();
    let mut w = Working::new(inst, &[]);
    let mut chosen = Vec::new();
    while !w.feasible() {
        let open: Vec<usize> = (0..n).filter(|&j| !w.is_covered(j)).collect();
        let u = open[rng.gen_range(0..open.len())];
        let mut best = (w.gain(u), u);
        for &c in inst.covered_by(u) {
            let g = w.gain(c);
            if g > best.0 || (g == best.0 && c < best.1) {
                best = (g, c);
            }
        }
        let k = w.order.len();
        w.insert_at(best.1, k);
        chosen.push(best.1);
    }
    let mut order = vec![chosen[0]];
    let mut rest: Vec<usize> = chosen[1..].to_vec();
    while !rest.is_empty() {
        let last = *order.last().expect("nonempty");
        let (i, _) = rest
            .iter()
            .enumerate()
            .min_by(|a, b| inst.d(last, *a.1).total_cmp(&inst.d(last, *b.1)).then(a.1.cmp(b.1)))
            .expect("nonempty");
        order.push(rest.swap_remove(i));
    }
    Tour::from_unique(order)
}

/// 2-opt to a local optimum. The city set is unchanged.
pub fn two_opt(inst: &CspInstance, tour: &Tour) -> Tour {
    let mut order = tour.order().to_vec();
    two_opt_in_place(inst, &mut order);
    Tour::from_unique(order)
}

fn polish(w: &mut Working) {
    loop {
        w.drop_redundant();
        two_opt_in_place(w.inst(), &mut w.order);
        if !w.drop_redundant_pass() {
            break;
        }
    }
}

/// Redundant-city removal followed by 2-opt, repeated until neither changes
/// the tour. Never longer than the input; applying it twice changes nothing.
pub fn posterior_improve(inst: &CspInstance, tour: &Tour) -> Result<Tour> {
    if !csp_core::is_feasible(inst, tour)? {
        return Err(LsError::Infeasible);
    }
    let mut w = Working::new(inst, tour.order());
    polish(&mut w);
    Ok(Tour::from_unique(w.order))
}

fn sample_weighted<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return rng.gen_range(0..weights.len());
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn ls1_perturb<R: Rng>(w: &mut Working, fraction: f64, rng: &mut R) {
    let k = w.order.len();
    let m = ((fraction * k as f64).ceil() as usize).clamp(1, k);
    for _ in 0..m {
        let savings: Vec<f64> = (0..w.order.len()).map(|p| w.removal_saving(p).max(0.0)).collect();
        let p = sample_weighted(&savings, rng);
        w.remove_at(p);
    }
    let n = w.inst().n();
    while !w.feasible() {
        let cands: Vec<(usize, f64, usize)> = (0..n)
            .filter(|&c| !w.is_on(c) && w.gain(c) > 0)
            .map(|c| {
                let (inc, pos) = w.best_insertion(c);
                (c, inc, pos)
            })
            .collect();
        let weights: Vec<f64> = cands.iter().map(|&(_, inc, _)| 1.0 / (1e-6 + inc.max(0.0))).collect();
        let (c, _, pos) = cands[sample_weighted(&weights, rng)];
        w.insert_at(c, pos);
    }
}

fn ls2_perturb<R: Rng>(w: &mut Working, candidates: usize, rng: &mut R) {
    let p = rng.gen_range(0..w.order.len());
    let r = w.remove_at(p);
    let inst = w.inst();
    let mut by_distance: Vec<usize> = (0..inst.n()).filter(|&c| c != r).collect();
    by_distance.sort_by(|&a, &b| inst.d(r, a).total_cmp(&inst.d(r, b)).then(a.cmp(&b)));
    while !w.feasible() {
        let near: Vec<usize> = by_distance
            .iter()
            .copied()
            .filter(|&c| !w.is_on(c) && w.gain(c) > 0)
            .take(candidates)
            .collect();
        let c = near
            .iter()
            .copied()
            .min_by(|&a, &b| w.best_insertion(a).0.total_cmp(&w.best_insertion(b).0))
            .unwrap_or(r);
        let (_, pos) = w.best_insertion(c);
        w.insert_at(c, pos);
    }
}

/// Runs LS1 or LS2 under `cfg`, recording every improvement.
pub fn solve(inst: &CspInstance, variant: Variant, cfg: &LsConfig) -> Result<LsRun> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = initial_solution(inst, &mut rng);
    let mut cur = Working::new(inst, init.order());
    polish(&mut cur);
    let mut cur_cost = cur.cost();
    let mut best = cur.order.clone();
    let mut best_cost = cur_cost;
    let reached = |c: f64| cfg.target_cost.is_some_and(|t| c <= t);
    let mut trace = vec![TracePoint {
        iteration: 0,
        elapsed_s: start.elapsed().as_secs_f64(),
        best_cost,
    }];
    let mut iterations = 0;
    let mut stall = 0;
    while !reached(best_cost) && stall < cfg.max_stall_iters {
        if cfg.time_limit_s.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            break;
        }
        iterations += 1;
        let mut cand = cur.clone();
        match variant {
            Variant::Ls1 => ls1_perturb(&mut cand, cfg.destroy_fraction, &mut rng),
            Variant::Ls2 => ls2_perturb(&mut cand, cfg.ls2_candidates, &mut rng),
        }
        polish(&mut cand);
        let cost = cand.cost();
        if cost < best_cost - IMPROVEMENT_EPS {
            best = cand.order.clone();
            best_cost = cost;
            stall = 0;
            trace.push(TracePoint {
                iteration: iterations,
                elapsed_s: start.elapsed().as_secs_f64(),
                best_cost,
            });
        } else {
            stall += 1;
        }
        if cost <= cur_cost {
            cur = cand;
            cur_cost = cost;
        }
    }
    Ok(LsRun {
        cost: cycle_length(inst, &best),
        tour: Tour::from_unique(best),
        iterations,
        trace,
        reached_target: reached(best_cost),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

pub fn ls1_solve(inst: &CspInstance, cfg: &LsConfig) -> Result<Tour> {
    Ok(solve(inst, Variant::Ls1, cfg)?.tour)
}

pub fn ls2_solve(inst: &CspInstance, cfg: &LsConfig) -> Result<Tour> {
    Ok(solve(inst, Variant::Ls2, cfg)?.tour)
}
