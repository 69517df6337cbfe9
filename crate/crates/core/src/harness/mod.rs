//! Verification oracle, statistics and experiment orchestration.

pub mod config;
pub mod experiment;
pub mod stats;
pub mod suite;
pub mod torus;

pub use config::{BuiltModel, ExperimentConfig, LoadedConfig, ModelSpec};
pub use experiment::{run_experiment, Assertion, ExperimentKind, ExperimentReport, RunOptions};
pub use suite::{run_criterion, run_suite, CriterionResult, SuiteOptions, CRITERIA};
pub use torus::{detailed_balance, torus_long_run, OracleParams, TorusSimulator};
