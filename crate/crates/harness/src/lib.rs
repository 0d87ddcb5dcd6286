//! Configuration-driven experiments on randomized urns and elephant random
//! walks: replication with deterministic seeding, convergence summaries,
//! assumption diagnostics and CSV outputs.

pub mod analyze;
pub mod config;
pub mod diagnose;
pub mod error;
pub mod experiment;
pub mod output;

pub use analyze::{analyze_matrix, MatrixReport};
pub use config::{ExperimentConfig, Model};
pub use diagnose::{diagnose, DiagnosticsReport};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ConvergenceSummary, ExperimentResult, RunSettings, SummaryPoint};
pub use output::{emit_plot_data, write_outputs, PlotRow};
