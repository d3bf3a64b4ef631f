//! Batch front end for `vosprop-core`: dataset IO, synthetic sequences,
//! multi-threaded orchestration, configuration files, reports and the CLI.

pub mod cli;
pub mod error;
pub mod io;
pub mod manifest;
pub mod report;
pub mod run;
pub mod settings;
pub mod synth;

pub use error::{Error, Result};
