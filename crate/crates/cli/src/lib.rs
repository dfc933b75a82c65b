//! Pipeline orchestration behind the `amlcli` binary: configuration, atomic
//! outputs, and the stage functions each subcommand runs.

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;

pub use config::PipelineConfig;
pub use pipeline::Method;
