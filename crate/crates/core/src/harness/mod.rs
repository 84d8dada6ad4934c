//! Experiment harness: configuration, runs, comparisons, traces, plots and
//! numerical self-checks.

pub mod compare;
pub mod config;
pub mod plot;
pub mod runner;
pub mod trace;
pub mod verify;

pub use compare::{run_compare, CompareOutput};
pub use config::ExperimentConfig;
pub use plot::{render_plot, render_svg};
pub use runner::{run_experiment, run_with, RunOutput, Summary};
pub use trace::{read_csv, write_trace, Status, TraceRecord, CSV_HEADER};
pub use verify::{verify_suite, Scope, VerifyReport};
