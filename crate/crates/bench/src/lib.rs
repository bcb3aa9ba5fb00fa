//! Command-line harness: instance generation, training, solving, benchmark
//! tables and the stop-at-cost experiment.

pub mod cli;
pub mod instances;
pub mod records;
pub mod solvers;
pub mod stop;

pub use instances::{generate, load_instances, NamedInstance, SpecArgs, SpecKind};
pub use records::{summarize, BenchRecord, BenchSummary};
pub use solvers::{bench_instances, run_solver, Model, SolveOptions, Solution, Solver};
pub use stop::{stop_at_cost, summarize_stops, StopRecord, StopSummary};

/// Worker cap from `CSP_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("CSP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}
