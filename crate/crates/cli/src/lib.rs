//! Batch driver: reads a run configuration, runs the fit, compare and
//! cluster stages over every language and dimension, and writes one JSON
//! report per analysis unit plus a manifest per command.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod records;
pub mod render;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use pipeline::{Outcome, Overrides};
