//! Experiment configuration, grid runs, table reproduction and spectrum
//! sweeps behind the command-line front end.

pub mod config;
pub mod run;
pub mod spectrum_job;
pub mod tables;

pub use config::{ExperimentConfig, Method, MethodConfig, OneOrMany, ProblemConfig, RunConfig};
pub use run::{run_experiment, write_outputs, Manifest, ResultRow, Runner};
pub use spectrum_job::{run_spectrum, write_scatter, SpectrumCase, SpectrumConfig};
pub use tables::{reproduce_table, ReferenceTable, TableOptions, TableResult, TABLE_IDS};
