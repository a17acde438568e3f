//! Experiment configuration, execution and summaries.

pub mod config;
pub mod run;
pub mod scenario;
pub mod summary;
pub mod verify;

pub use config::{preset, ExperimentConfig, MasterKind, PRESETS};
pub use run::{run_experiment, run_seed, RunOutput, SeedRun};
pub use scenario::{build_env, build_learners, Instance, Master};
pub use summary::{compare_to_oracle, fit_loglog_slope};
