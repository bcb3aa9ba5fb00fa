use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use csp_autodiff::checkpoint::Checkpoint;
use csp_ls::Variant;
use csp_model::trainer::{best_checkpoint_path, epoch_checkpoint_path, train, TrainConfig};
use csp_model::EncoderConfig;

use crate::instances::{generate, load_instances, SpecArgs};
use crate::records::{record_table, summarize, summary_table, write_csv};
use crate::solvers::{bench_instances, Model, SolveOptions, Solver};
use crate::stop::{stop_at_cost, stop_table, summarize_stops};

#[derive(Debug, Parser)]
#[command(name = "csp", about = "Covering salesman problem: learned and heuristic solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write random instances as JSON files.
    Generate(GenerateArgs),
    /// Train the model, resuming from the output directory when possible.
    Train(TrainArgs),
    /// Solve instances and list one row per (instance, solver).
    Solve(SolveArgs),
    /// Solve instances and print mean cost, gap and time per solver.
    Bench(BenchArgs),
    /// Time the heuristics until they match the model's tour.
    StopAtCost(StopArgs),
    /// Solve tiny instances exactly.
    Exact(ExactArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10_000)]
    pub instances_per_epoch: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1000)]
    pub validation_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 8)]
    pub heads: usize,
    #[arg(long, default_value_t = 512)]
    pub ff_dim: usize,
    /// Epoch checkpoint to resume from.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Write zero wall times so metric files are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Instance files or directories of them.
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub stall_iters: usize,
    #[arg(long)]
    pub time_limit_s: Option<f64>,
    /// Record zero times and solve instances in parallel.
    #[arg(long)]
    pub no_timing: bool,
}

impl RunArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            seed: self.seed,
            stall_iters: self.stall_iters,
            time_limit_s: self.time_limit_s,
            timing: !self.no_timing,
        }
    }

    fn model(&self, required: bool) -> Result<Option<Model>> {
        match &self.checkpoint {
            Some(p) => Ok(Some(Model::load(p)?)),
            None if required => bail!("--checkpoint is required"),
            None => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ls1")]
    pub solver: Vec<Solver>,
    /// CSV of records.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ls1,ls2")]
    pub solvers: Vec<Solver>,
    /// CSV of records.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary CSV; defaults to `<out>` with a `_summary` suffix.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Heuristic {
    Ls1,
    Ls2,
}

impl From<Heuristic> for Variant {
    fn from(h: Heuristic) -> Variant {
        match h {
            Heuristic::Ls1 => Variant::Ls1,
            Heuristic::Ls2 => Variant::Ls2,
        }
    }
}

#[derive(Debug, Args)]
pub struct StopArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ls1,ls2")]
    pub heuristics: Vec<Heuristic>,
    /// Use this target instead of the model's cost.
    #[arg(long)]
    pub target_cost: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn summary_path(out: &Path, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.with_file_name(format!("{stem}_summary.csv"))
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let paths = generate(a.n, &a.spec.generator(), a.count, a.seed, &a.out)?;
            println!("wrote {} instances to {}", paths.len(), a.out.display());
        }
        Command::Train(a) => cmd_train(a)?,
        Command::Solve(a) => {
            let instances = load_instances(&a.run.instances)?;
            let model = a.run.model(a.solver.iter().any(|s| s.needs_model()))?;
            let records = bench_instances(&instances, &a.solver, model.as_ref(), &a.run.options())?;
            if let Some(out) = &a.out {
                write_csv(out, &records)?;
            }
            print!("{}", record_table(&records));
        }
        Command::Bench(a) => {
            let instances = load_instances(&a.run.instances)?;
            let model = a.run.model(a.solvers.iter().any(|s| s.needs_model()))?;
            let records = bench_instances(&instances, &a.solvers, model.as_ref(), &a.run.options())?;
            write_csv(&a.out, &records)?;
            let summary = summarize(&records);
            write_csv(&summary_path(&a.out, &a.summary), &summary)?;
            println!("{} instances", instances.len());
            print!("{}", summary_table(&summary));
        }
        Command::StopAtCost(a) => {
            let instances = load_instances(&a.run.instances)?;
            let model = a.run.model(true)?.expect("required");
            let heuristics: Vec<Variant> = a.heuristics.iter().map(|&h| h.into()).collect();
            let records = stop_at_cost(&instances, &heuristics, &model, &a.run.options(), a.target_cost)?;
            write_csv(&a.out, &records)?;
            let summary = summarize_stops(&records);
            write_csv(&summary_path(&a.out, &a.summary), &summary)?;
            print!("{}", stop_table(&summary));
        }
        Command::Exact(a) => {
            let instances = load_instances(&a.instances)?;
            let opts = SolveOptions {
                timing: false,
                ..SolveOptions::default()
            };
            let records = bench_instances(&instances, &[Solver::Exact], None, &opts)?;
            if let Some(out) = &a.out {
                write_csv(out, &records)?;
            }
            print!("{}", record_table(&records));
        }
    }
    Ok(())
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        model: EncoderConfig {
            d_h: a.hidden_dim,
            num_layers: a.layers,
            num_heads: a.heads,
            d_ff: a.ff_dim,
        },
        n_cities: a.n,
        spec: a.spec.generator(),
        batch_size: a.batch_size,
        epochs: a.epochs,
        lr: a.lr,
        validation_size: a.validation_size,
        seed: a.seed,
        record_wall_time: !a.no_timing,
        ..TrainConfig::desk(a.n)
    }
    .with_instances_per_epoch(a.instances_per_epoch)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a);
    if let Some(ckpt) = &a.checkpoint {
        if !ckpt.exists() {
            bail!("checkpoint {} does not exist", ckpt.display());
        }
        let ck = Checkpoint::read(ckpt).with_context(|| format!("reading {}", ckpt.display()))?;
        let Some(epoch) = ck.meta["epoch"].as_u64() else {
            bail!("{} is not a training checkpoint", ckpt.display());
        };
        fs::create_dir_all(&a.out)?;
        let dest = epoch_checkpoint_path(&a.out, epoch as usize);
        let same = fs::canonicalize(ckpt).ok() == fs::canonicalize(&dest).ok();
        if !same {
            fs::copy(ckpt, &dest)?;
        }
    }
    let outcome = train(&cfg, &a.out)?;
    println!("initial validation cost {:.4}", outcome.initial_validation_cost);
    println!("{:>5}  {:>10}  {:>10}  {:>8}", "Epoch", "Validation", "Baseline", "Replaced");
    for e in &outcome.epochs {
        println!(
            "{:>5}  {:>10.4}  {:>10.4}  {:>8}",
            e.epoch,
            e.validation_cost,
            e.baseline_cost,
            if e.baseline_replaced != 0 { "yes" } else { "no" }
        );
    }
    println!("best checkpoint {}", best_checkpoint_path(&a.out).display());
    Ok(())
}
