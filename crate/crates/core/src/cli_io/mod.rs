//! Config parsing, experiment dispatch and result files.

mod config;
mod output;
mod run;

pub use config::{
    parse_config, render, ConfigError, ExperimentConfig, ExperimentKind, GridSpec, SolverConfig, StudyConfig,
};
pub use output::{
    checks_csv, format_float, results_csv, write_artifacts, Artifacts, PlotFile, RESULTS_HEADER,
};
pub use run::{
    run, RunOptions, RunOutcome, EXIT_CONFIG, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_VIOLATION,
};
