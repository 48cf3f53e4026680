//! Benchmark orchestration: configs, datasets, grid search, end-to-end runs
//! and report emission.

pub mod config;
pub mod dataset;
pub mod grid;
pub mod report;
pub mod run;

pub use config::{BenchConfig, ReportFormat, SeedRecord, SolverEntry};
pub use dataset::{Dataset, Instance};
pub use grid::{grid_search_alpha, log_grid, AlphaFamily, GridSearch};
pub use report::{emit_report, load_results};
pub use run::{run_benchmark, worker_pool, RunOutcome, RunResults, StabilityRecord};
