//! Checkpoint-ensemble fusion over prediction logs.
//!
//! A prediction log holds, for a fixed evaluation set, the class-probability
//! matrix emitted by every stored training checkpoint. This crate computes
//! forget and learning fractions over those trajectories, fits and applies
//! knowledge-fusion plans (greedy, validated blending of early checkpoints
//! into the final model), evaluates the non-training-altering ensemble
//! baselines, and generates synthetic logs with exact ground truth.
//!
//! The crate is `no_std` and only needs `alloc`. Storage lives behind the
//! [`CheckpointSource`] trait so that on-disk logs can stream one checkpoint
//! at a time.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod baselines;
pub mod checkpoint;
mod error;
pub mod fixtures;
pub mod fusion;
pub mod metrics;
pub mod probs;
pub mod subset;
pub mod synth;

pub use checkpoint::{Checkpoint, CheckpointSource, MemoryLog, ROW_SUM_TOLERANCE};
pub use error::{Error, Result};
pub use fusion::{EpsilonGrid, FitConfig, FitMode, FusedOutput, FusionPlan, FusionStep};
pub use metrics::ForgetCurve;
pub use probs::DenseProbs;
pub use subset::SubsetMask;
