//! Storage, plan files, benchmarking and reporting around `fusekit-core`.
//!
//! A prediction log on disk is a directory holding `manifest.json`,
//! `labels.bin`, optionally `clean_labels.bin`, and one `epoch_<id>.bin` per
//! stored checkpoint. See [`logstore`] for the exact layout.

mod error;
pub mod harness;
pub mod inspect;
pub mod logstore;
pub mod plan_file;
mod svg;
pub mod synthetic;

pub use fusekit_core as core;
pub use error::{Error, Result};
pub use logstore::{open_log, validate_log, write_log, DiskLog, LogWriter, StoreError};
