//! Evaluation harness, file formats and command line for `rabamcp-core`.

pub mod config;
pub mod error;
pub mod eval;
pub mod export;
pub mod oracle;

pub use config::{DomainConfig, Method, RunConfig};
pub use error::CliError;
pub use eval::{ablation, run_evaluation, EvalOptions, Evaluation, MetricsRow};
