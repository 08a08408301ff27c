//! Command-line front end: file formats, configuration, synthesis modes and
//! the replay/evaluation harness.

pub mod audio;
pub mod benchmark;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod replay;

pub use commands::{Context, RenderTarget};
pub use config::{Config, Overrides};
pub use error::{CliError, CliResult};
pub use pipeline::PipelineMode;
