//! Experiment files, seeded execution and result files.

mod config;
mod run;

pub use config::{load_config, parse_config, BatchBlock, ConfigErrors, ExperimentConfig, ExperimentKind, MetaBlock};
pub use run::{
    execute, render, render_csv, render_summary, run_experiment, run_seed, Report, Row, SeedRun, WrittenReport,
    CSV_HEADER, METRICS,
};
