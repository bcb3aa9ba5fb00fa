//! Covering salesman problem primitives: instances, coverage sets, tours,
//! feasibility, tour lengths, random generation, the JSON instance format and
//! an exact solver for tiny instances.

mod coverage;
mod error;
pub mod exact;
mod instance;
pub mod io;
mod tour;

pub use coverage::{compute_cover_sets, CoverageSpec, SpecGenerator};
pub use error::CspError;
pub use exact::{solve_exact, OracleResult, DEFAULT_EXACT_MAX_N};
pub use instance::{dist, generate_instance, generate_with, CspInstance, Point};
pub use tour::{cycle_length, is_feasible, tour_length, Tour};

pub type Result<T, E = CspError> = std::result::Result<T, E>;
