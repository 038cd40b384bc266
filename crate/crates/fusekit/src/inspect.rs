//! Curve and histogram reports over a log, with CSV, JSON and SVG output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fusekit_core::metrics::{
    accuracy_curve_against, default_loss_threshold, forget_learn_curve, large_loss_balance,
    last_correct_histogram, persistence_histogram, retention_curve,
};
use fusekit_core::{CheckpointSource, SubsetMask};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceBin {
    /// Checkpoints at which the example was correct.
    pub correct_checkpoints: usize,
    pub count: usize,
    /// Share of final mistakes correct at this many checkpoints or more.
    pub at_least: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LastCorrectBin {
    pub epoch: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBalance {
    pub threshold: f64,
    pub values: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InspectReport {
    pub epochs: Vec<u64>,
    pub subset_size: usize,
    pub acc: Vec<f64>,
    #[serde(rename = "F")]
    pub forget: Vec<f64>,
    #[serde(rename = "L")]
    pub learn: Vec<f64>,
    /// Accuracy against clean labels, when the log has them.
    pub clean_acc: Option<Vec<f64>>,
    pub retention: Vec<Option<f64>>,
    pub final_mistakes: usize,
    pub persistence: Vec<PersistenceBin>,
    pub last_correct: Vec<LastCorrectBin>,
    pub never_correct: usize,
    pub loss_balance: Option<LossBalance>,
}

/// `loss_balance`: `None` to skip, `Some(None)` for the default threshold
/// `ln C`, `Some(Some(t))` for an explicit one.
pub fn inspect<L: CheckpointSource + ?Sized>(
    log: &L,
    subset: &SubsetMask,
    loss_balance: Option<Option<f64>>,
) -> Result<InspectReport> {
    let curve = forget_learn_curve(log, subset)?;
    let clean_acc = match log.clean_labels() {
        Some(clean) => Some(accuracy_curve_against(log, clean, subset)?),
        None => None,
    };
    let persistence = persistence_histogram(log, subset)?;
    let at_least = persistence.at_least();
    let last_correct = last_correct_histogram(log, subset)?;
    let loss_balance = match loss_balance {
        None => None,
        Some(t) => {
            let threshold = t.unwrap_or_else(|| default_loss_threshold(log.n_classes()));
            Some(LossBalance { threshold, values: large_loss_balance(log, threshold, subset)? })
        }
    };
    Ok(InspectReport {
        epochs: curve.epochs,
        subset_size: curve.subset_size,
        acc: curve.acc,
        forget: curve.forget,
        learn: curve.learn,
        clean_acc,
        retention: retention_curve(log, subset)?,
        final_mistakes: persistence.total,
        persistence: persistence
            .bins
            .iter()
            .map(|(&c, &count)| PersistenceBin {
                correct_checkpoints: c,
                count,
                at_least: at_least.iter().find(|&&(t, _)| t == c).map_or(0.0, |&(_, f)| f),
            })
            .collect(),
        last_correct: last_correct
            .bins
            .iter()
            .map(|(&k, &count)| LastCorrectBin { epoch: log.epochs()[k], count })
            .collect(),
        never_correct: last_correct.never,
        loss_balance,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl InspectReport {
    /// `epoch,acc,F,L`, one row per checkpoint.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("epoch,acc,F,L\n");
        for k in 0..self.epochs.len() {
            writeln!(out, "{},{},{},{}", self.epochs[k], self.acc[k], self.forget[k], self.learn[k]).unwrap();
        }
        out
    }

    pub fn retention_csv(&self) -> String {
        let mut out = String::from("epoch,retention,clean_acc\n");
        for (k, r) in self.retention.iter().enumerate() {
            let clean = self.clean_acc.as_ref().map(|c| c[k]);
            writeln!(out, "{},{},{}", self.epochs[k], opt(*r), opt(clean)).unwrap();
        }
        out
    }

    pub fn persistence_csv(&self) -> String {
        let mut out = String::from("correct_checkpoints,count,at_least\n");
        for b in &self.persistence {
            writeln!(out, "{},{},{}", b.correct_checkpoints, b.count, b.at_least).unwrap();
        }
        out
    }

    /// Examples never correct appear with an empty epoch.
    pub fn last_correct_csv(&self) -> String {
        let mut out = String::from("epoch,count\n");
        for b in &self.last_correct {
            writeln!(out, "{},{}", b.epoch, b.count).unwrap();
        }
        if self.never_correct > 0 {
            writeln!(out, ",{}", self.never_correct).unwrap();
        }
        out
    }

    pub fn loss_balance_csv(&self) -> Option<String> {
        let lb = self.loss_balance.as_ref()?;
        let mut out = String::from("epoch,balance\n");
        for (e, v) in self.epochs.iter().zip(&lb.values) {
            writeln!(out, "{e},{v}").unwrap();
        }
        Some(out)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn curves_svg(&self) -> String {
        let x: Vec<f64> = self.epochs.iter().map(|&e| e as f64).collect();
        let mut series = vec![
            Series { name: "acc", values: self.acc.clone() },
            Series { name: "F", values: self.forget.clone() },
            Series { name: "L", values: self.learn.clone() },
        ];
        if let Some(clean) = &self.clean_acc {
            series.push(Series { name: "clean acc", values: clean.clone() });
        }
        line_chart("epoch", &x, &series)
    }

    /// Writes the report to `out`. A `.json` path gets the whole report; any
    /// other path gets the curves CSV plus sibling `<stem>_<table>.csv` files.
    /// Returns every path written.
    pub fn write(&self, out: &Path, svg: Option<&Path>) -> Result<Vec<PathBuf>> {
        let mut files: Vec<(PathBuf, String)> = Vec::new();
        if out.extension().is_some_and(|e| e == "json") {
            files.push((out.to_path_buf(), self.to_json()));
        } else {
            let stem = out.file_stem().map_or_else(|| "curves".into(), |s| s.to_string_lossy().into_owned());
            let sibling = |table: &str| out.with_file_name(format!("{stem}_{table}.csv"));
            files.push((out.to_path_buf(), self.curves_csv()));
            files.push((sibling("retention"), self.retention_csv()));
            files.push((sibling("persistence"), self.persistence_csv()));
            files.push((sibling("last_correct"), self.last_correct_csv()));
            if let Some(lb) = self.loss_balance_csv() {
                files.push((sibling("loss_balance"), lb));
            }
        }
        if let Some(svg) = svg {
            files.push((svg.to_path_buf(), self.curves_svg()));
        }
        for (path, text) in &files {
            fs::write(path, text).map_err(|e| Error::io(path, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fusekit_core::fixtures::t4;

    #[test]
    fn t4_curves_csv() {
        let log = t4();
        let report = inspect(&log, &SubsetMask::all(4), None).unwrap();
        assert_eq!(report.curves_csv(), "epoch,acc,F,L\n1,0.75,0.25,0.25\n2,0.75,0,0\n3,0.75,0,0\n");
        assert_eq!(report.final_mistakes, 1);
        assert_eq!(report.last_correct, vec![LastCorrectBin { epoch: 1, count: 1 }]);
    }

    #[test]
    fn loss_balance_needs_clean_labels() {
        let err = inspect(&t4(), &SubsetMask::all(4), Some(None)).unwrap_err();
        assert!(matches!(err, Error::Core(fusekit_core::Error::MissingCleanLabels)));
    }
}
