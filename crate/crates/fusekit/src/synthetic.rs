//! Writing generated logs to disk with their ground-truth sidecar.

use std::fs;
use std::path::Path;

use fusekit_core::synth::{generate_lazy, GroundTruth, TrajectorySpec};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::logstore::write_source;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Serialize)]
struct Sidecar<'a> {
    spec: &'a TrajectorySpec,
    truth: &'a GroundTruth,
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<TrajectorySpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: TrajectorySpec = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    spec.validate()?;
    Ok(spec)
}

/// Generates the log described by `spec` into `dir`, one checkpoint in memory
/// at a time, and writes `ground_truth.json` next to it.
pub fn write_synthetic(spec: &TrajectorySpec, dir: impl AsRef<Path>) -> Result<GroundTruth> {
    let dir = dir.as_ref();
    let log = generate_lazy(spec)?;
    write_source(dir, &log)?;
    let truth = log.ground_truth().clone();
    let path = dir.join(GROUND_TRUTH_FILE);
    let text = serde_json::to_string(&Sidecar { spec, truth: &truth }).expect("sidecar serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(truth)
}
