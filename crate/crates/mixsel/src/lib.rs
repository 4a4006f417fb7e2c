//! Command-line and file-format layer over `mixsel-core`: dataset ingest,
//! run configs, study drivers with thread-count-independent outputs, and run
//! manifests.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod manifest;
pub mod parse;

pub use config::{RunConfig, Study};
pub use error::{MixselError, Result};
pub use experiments::{resolve_threads, run_study, write_run, Artifact, StudyResult, StudyRun};
