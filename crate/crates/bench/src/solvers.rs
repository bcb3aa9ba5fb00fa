use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use csp_autodiff::ParamStore;
use csp_core::{cycle_length, is_feasible, solve_exact, CspInstance, Tour, DEFAULT_EXACT_MAX_N};
use csp_ls::{posterior_improve, LsConfig, Variant};
use csp_model::seeds::derive;
use csp_model::{load_model, rollout, Decode, EncoderConfig};
use rayon::prelude::*;

use crate::instances::NamedInstance;
use crate::records::BenchRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum)]
pub enum Solver {
    ModelGreedy,
    ModelGreedyLs,
    Ls1,
    Ls2,
    Exact,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::ModelGreedy => "model-greedy",
            Solver::ModelGreedyLs => "model-greedy-ls",
            Solver::Ls1 => "ls1",
            Solver::Ls2 => "ls2",
            Solver::Exact => "exact",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Solver::ModelGreedy | Solver::ModelGreedyLs)
    }
}

pub struct Model {
    pub cfg: EncoderConfig,
    pub params: ParamStore,
}

impl Model {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            bail!("checkpoint {} does not exist", path.display());
        }
        let (cfg, params) = load_model(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        Ok(Model { cfg, params })
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub seed: u64,
    pub stall_iters: usize,
    pub time_limit_s: Option<f64>,
    /// Off: times are written as 0 and instances run in parallel.
    pub timing: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 0,
            stall_iters: LsConfig::default().max_stall_iters,
            time_limit_s: None,
            timing: true,
        }
    }
}

impl SolveOptions {
    /// Per-instance solver seed.
    pub fn seed_for(&self, inst: &CspInstance) -> u64 {
        derive(self.seed, &[inst.seed()])
    }

    pub fn ls_config(&self, inst: &CspInstance) -> LsConfig {
        LsConfig {
            max_stall_iters: self.stall_iters,
            time_limit_s: self.time_limit_s,
            ..LsConfig::with_seed(self.seed_for(inst))
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub tour: Tour,
    pub cost: f64,
    pub wall_time_s: f64,
}

/// Model greedy decode followed by redundant-city removal and 2-opt.
pub fn model_greedy_ls(inst: &CspInstance, model: &Model) -> Result<Tour> {
    let r = rollout(&model.params, &model.cfg, inst, Decode::Greedy)?;
    Ok(posterior_improve(inst, &r.tour)?)
}

/// Runs one solver. The reported time covers everything the solver does,
/// model inference and polishing included.
pub fn run_solver(inst: &CspInstance, solver: Solver, model: Option<&Model>, opts: &SolveOptions) -> Result<Solution> {
    let need = || model.context("model solvers need --checkpoint");
    let start = Instant::now();
    let tour = match solver {
        Solver::ModelGreedy => {
            let m = need()?;
            rollout(&m.params, &m.cfg, inst, Decode::Greedy)?.tour
        }
        Solver::ModelGreedyLs => model_greedy_ls(inst, need()?)?,
        Solver::Ls1 => csp_ls::solve(inst, Variant::Ls1, &opts.ls_config(inst))?.tour,
        Solver::Ls2 => csp_ls::solve(inst, Variant::Ls2, &opts.ls_config(inst))?.tour,
        Solver::Exact => {
            if inst.n() > DEFAULT_EXACT_MAX_N {
                bail!("exact solver is limited to n <= {DEFAULT_EXACT_MAX_N}, got {}", inst.n());
            }
            solve_exact(inst, DEFAULT_EXACT_MAX_N)?.tour
        }
    };
    let wall_time_s = if opts.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(Solution {
        cost: cycle_length(inst, tour.order()),
        tour,
        wall_time_s,
    })
}

fn record(named: &NamedInstance, solver: Solver, model: Option<&Model>, opts: &SolveOptions) -> Result<BenchRecord> {
    let inst = &named.instance;
    let sol = run_solver(inst, solver, model, opts).with_context(|| format!("{} on {}", solver.name(), named.id))?;
    if !is_feasible(inst, &sol.tour)? {
        bail!("{} produced an infeasible tour on {}", solver.name(), named.id);
    }
    Ok(BenchRecord {
        instance_id: named.id.clone(),
        n: inst.n(),
        spec: inst.spec().descriptor(),
        solver: solver.name().to_string(),
        cost: sol.cost,
        feasible: true,
        wall_time_s: sol.wall_time_s,
        seed: opts.seed_for(inst),
    })
}

/// One record per (instance, solver), instance-major. Timed runs are
/// sequential; untimed runs spread instances over the thread pool.
pub fn bench_instances(
    instances: &[NamedInstance],
    solvers: &[Solver],
    model: Option<&Model>,
    opts: &SolveOptions,
) -> Result<Vec<BenchRecord>> {
    if model.is_none() {
        if let Some(s) = solvers.iter().find(|s| s.needs_model()) {
            bail!("solver {} needs --checkpoint", s.name());
        }
    }
    let per_instance = |named: &NamedInstance| -> Result<Vec<BenchRecord>> {
        solvers.iter().map(|&s| record(named, s, model, opts)).collect()
    };
    let nested: Vec<Vec<BenchRecord>> = if opts.timing {
        instances.iter().map(per_instance).collect::<Result<_>>()?
    } else {
        instances.par_iter().map(per_instance).collect::<Result<_>>()?
    };
    Ok(nested.into_iter().flatten().collect())
}
