//! Scenario files, runs, reports and plots.

pub mod baseline;
pub mod config;
pub mod plot;
pub mod runner;

pub use baseline::{flood, naive_averaging_baseline, FloodResult, NaiveBaseline};
pub use config::{AlgorithmConfig, ExperimentConfig, Prepared};
pub use plot::emit_plots;
pub use runner::{compare, load_summary, report, run_scenario, CheckOutcome, Comparison, RunSummary, TrackerComparison};
