//! Experiment layer: configuration files, seeded scenarios, sweeps, CSV and
//! plot output, and the validation suites.

mod config;
pub mod oracles;
mod output;
mod scenario;
mod sweep;

pub use config::{HarnessConfig, ScenarioConfig, SolverConfig, SweepParam, SweepSpec};
pub use output::{to_csv, write_csv, write_svg, CSV_HEADER};
pub use sweep::{median_row, run_sweep, run_sweep_cached, worker_count, ResultRow, SolveCache, SweepTable, WORKERS_ENV};
