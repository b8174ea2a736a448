//! Experiment orchestration: repeated runs, the result tables, the base-count
//! sweep, and their CSV output.

pub mod config;
pub mod experiment;
pub mod report;
pub mod sweep;
pub mod tables;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig, Scale};
pub use experiment::{run_experiment, ExperimentResult, ExperimentRun, HarnessError, Lab, LabSettings, TrainedModel};
pub use report::{write_report, ResultTable};
pub use sweep::{run_sweep, SweepConfig, SweepResult};
pub use tables::{run_table, TableId};
