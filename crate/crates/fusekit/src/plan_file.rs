//! JSON serialization of fusion plans.
//!
//! ```json
//! {"format_version": 1, "w": 1, "grid": "0.01",
//!  "steps": [{"epoch": 1, "epsilon": "0.34"}],
//!  "fit": {"validation_digest": "…", "validation_size": 2, "seed": 0}}
//! ```
//! Weights are decimal strings on the plan's grid so they survive a round trip
//! exactly.

use std::fs;
use std::path::Path;

use fusekit_core::fusion::FitMetadata;
use fusekit_core::{EpsilonGrid, FusionPlan, FusionStep};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLAN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: u64,
    pub epsilon: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub format_version: u32,
    pub w: usize,
    pub grid: String,
    pub steps: Vec<StepRecord>,
    #[serde(default)]
    pub fit: FitRecord,
}

impl From<&FusionPlan> for PlanRecord {
    fn from(plan: &FusionPlan) -> Self {
        PlanRecord {
            format_version: PLAN_FORMAT_VERSION,
            w: plan.window,
            grid: plan.grid.step_string(),
            steps: plan
                .steps
                .iter()
                .map(|s| StepRecord { epoch: s.epoch, epsilon: plan.grid.format(s.epsilon_units) })
                .collect(),
            fit: FitRecord {
                validation_digest: plan.meta.validation_digest.map(|d| format!("{d:016x}")),
                validation_size: plan.meta.validation_size,
                seed: plan.meta.seed,
            },
        }
    }
}

impl TryFrom<PlanRecord> for FusionPlan {
    type Error = Error;

    fn try_from(record: PlanRecord) -> Result<Self> {
        if record.format_version != PLAN_FORMAT_VERSION {
            return Err(Error::PlanFormat(format!("unsupported format_version {}", record.format_version)));
        }
        let grid = EpsilonGrid::parse_step(&record.grid)?;
        let steps = record
            .steps
            .iter()
            .map(|s| Ok(FusionStep { epoch: s.epoch, epsilon_units: grid.parse(&s.epsilon)? }))
            .collect::<Result<Vec<_>>>()?;
        let validation_digest = record
            .fit
            .validation_digest
            .as_deref()
            .map(|d| u64::from_str_radix(d, 16).map_err(|_| Error::PlanFormat(format!("bad digest {d:?}"))))
            .transpose()?;
        Ok(FusionPlan {
            window: record.w,
            grid,
            steps,
            meta: FitMetadata { validation_digest, validation_size: record.fit.validation_size, seed: record.fit.seed },
        })
    }
}

pub fn plan_to_json(plan: &FusionPlan) -> String {
    let mut text = serde_json::to_string_pretty(&PlanRecord::from(plan)).expect("plan serializes");
    text.push('\n');
    text
}

pub fn plan_from_json(text: &str) -> Result<FusionPlan> {
    let record: PlanRecord = serde_json::from_str(text).map_err(|e| Error::PlanFormat(e.to_string()))?;
    record.try_into()
}

pub fn save_plan(path: impl AsRef<Path>, plan: &FusionPlan) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, plan_to_json(plan)).map_err(|e| Error::io(path, e))
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<FusionPlan> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    plan_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_decimal_weights() {
        let plan = FusionPlan {
            window: 1,
            grid: EpsilonGrid::default(),
            steps: vec![FusionStep { epoch: 1, epsilon_units: 34 }],
            meta: FitMetadata { validation_digest: Some(0xabc), validation_size: Some(4), seed: Some(7) },
        };
        let text = plan_to_json(&plan);
        assert!(text.contains("\"epsilon\": \"0.34\""));
        assert!(text.contains("\"grid\": \"0.01\""));
        assert_eq!(plan_from_json(&text).unwrap(), plan);
    }

    #[test]
    fn rejects_off_grid_weight_and_unknown_version() {
        let off = r#"{"format_version":1,"w":1,"grid":"0.01","steps":[{"epoch":1,"epsilon":"0.345"}]}"#;
        assert!(plan_from_json(off).is_err());
        let version = r#"{"format_version":9,"w":1,"grid":"0.01","steps":[]}"#;
        assert!(matches!(plan_from_json(version), Err(Error::PlanFormat(_))));
    }
}
