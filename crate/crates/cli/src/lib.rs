//! Pipeline orchestration behind the `abprofile` binary.
//!
//! Each stage reads the artifacts persisted by earlier stages from the
//! output directory, writes its own, and records content hashes in
//! `manifest.json` so reruns can be skipped (`--resume`) and stale inputs
//! detected.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

pub use config::RunConfig;
pub use error::CliError;
pub use pipeline::{Pipeline, RunOptions, Stage};
