//! Batch harness: TOML configs, seeded job dispatch, hashed manifests,
//! summaries and the acceptance suite.

pub mod accept;
pub mod app;
pub mod config;
pub mod error;
pub mod jobs;
pub mod output;
pub mod report;

pub use app::{run_accept, run_section, Outcome, RunOptions};
pub use config::{Format, RunConfig};
pub use error::{CliError, Result};
