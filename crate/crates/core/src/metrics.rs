//! Accuracy, mistake sets, forget and learning fractions, and the trajectory
//! statistics derived from them.
//!
//! Every pass holds at most one checkpoint at a time: the final checkpoint is
//! reduced to a per-example correctness vector before the other checkpoints
//! are visited. Fractions are accumulated as integer counts and divided once,
//! so `acc(E) = acc(e) + L_e - F_e` holds to rounding of a single division.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::checkpoint::{Checkpoint, CheckpointSource};
use crate::error::{Error, Result};
use crate::probs::DenseProbs;
use crate::subset::SubsetMask;

pub fn predict_classes(matrix: &Checkpoint) -> Vec<u32> {
    matrix.predictions()
}

/// Per-member correctness of checkpoint `index` on `subset`, in subset order.
pub fn correct_flags<L: CheckpointSource + ?Sized>(
    log: &L,
    index: usize,
    subset: &SubsetMask,
) -> Result<Vec<bool>> {
    subset.check_universe(log.n_examples())?;
    let labels = log.labels();
    log.with_checkpoint(index, |cp| subset.iter().map(|i| cp.predict(i) == labels[i]).collect())
}

fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

pub fn accuracy<L: CheckpointSource + ?Sized>(log: &L, index: usize, subset: &SubsetMask) -> Result<f64> {
    subset.require_nonempty()?;
    let correct = correct_flags(log, index, subset)?;
    Ok(fraction(correct.iter().filter(|&&c| c).count(), subset.len()))
}

/// Accuracy of explicit predictions (aligned with `subset`) against the log labels.
pub fn prediction_accuracy(labels: &[u32], subset: &SubsetMask, predictions: &[u32]) -> Result<f64> {
    subset.require_nonempty()?;
    if predictions.len() != subset.len() {
        return Err(Error::LengthMismatch { what: "predictions", expected: subset.len(), actual: predictions.len() });
    }
    let hits = subset.iter().zip(predictions).filter(|&(i, &p)| labels[i] == p).count();
    Ok(fraction(hits, subset.len()))
}

/// Accuracy of every checkpoint on `subset` against an arbitrary label vector,
/// e.g. the clean labels of a noisy log.
pub fn accuracy_curve_against<L: CheckpointSource + ?Sized>(
    log: &L,
    labels: &[u32],
    subset: &SubsetMask,
) -> Result<Vec<f64>> {
    subset.require_nonempty()?;
    subset.check_universe(labels.len())?;
    (0..log.n_checkpoints())
        .map(|k| {
            let hits = log.with_checkpoint(k, |cp| subset.iter().filter(|&i| cp.predict(i) == labels[i]).count())?;
            Ok(fraction(hits, subset.len()))
        })
        .collect()
}

/// Examples of a reference subset misclassified at one checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MistakeSet {
    pub checkpoint: usize,
    pub examples: SubsetMask,
}

pub fn mistake_set<L: CheckpointSource + ?Sized>(
    log: &L,
    index: usize,
    subset: &SubsetMask,
) -> Result<MistakeSet> {
    let correct = correct_flags(log, index, subset)?;
    let wrong = subset.iter().zip(&correct).filter(|&(_, &c)| !c).map(|(i, _)| i);
    Ok(MistakeSet { checkpoint: index, examples: SubsetMask::from_indices(subset.universe(), wrong)? })
}

/// Per-checkpoint accuracy, forget fraction and learning fraction on a subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgetCurve {
    pub epochs: Vec<u64>,
    pub subset_size: usize,
    pub acc: Vec<f64>,
    pub forget: Vec<f64>,
    pub learn: Vec<f64>,
    /// Examples correct at each checkpoint.
    pub correct_counts: Vec<usize>,
    /// Examples correct at the checkpoint and wrong at the end.
    pub forgotten_counts: Vec<usize>,
    /// Examples wrong at the checkpoint and correct at the end.
    pub learned_counts: Vec<usize>,
}

impl ForgetCurve {
    pub fn len(&self) -> usize {
        self.acc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acc.is_empty()
    }

    /// Earliest checkpoint with the largest forget fraction.
    pub fn peak_forget(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, &f) in self.forget.iter().enumerate() {
            if f > best.1 {
                best = (k, f);
            }
        }
        best
    }
}

pub fn forget_learn_curve<L: CheckpointSource + ?Sized>(log: &L, subset: &SubsetMask) -> Result<ForgetCurve> {
    subset.require_nonempty()?;
    let last = log.last();
    let final_correct = correct_flags(log, last, subset)?;
    let labels = log.labels();
    let total = subset.len();
    let n_cp = log.n_checkpoints();
    let mut curve = ForgetCurve {
        epochs: log.epochs().to_vec(),
        subset_size: total,
        acc: Vec::with_capacity(n_cp),
        forget: Vec::with_capacity(n_cp),
        learn: Vec::with_capacity(n_cp),
        correct_counts: Vec::with_capacity(n_cp),
        forgotten_counts: Vec::with_capacity(n_cp),
        learned_counts: Vec::with_capacity(n_cp),
    };
    for k in 0..n_cp {
        let (correct, forgotten, learned) = if k == last {
            (final_correct.iter().filter(|&&c| c).count(), 0, 0)
        } else {
            log.with_checkpoint(k, |cp| {
                let mut counts = (0usize, 0usize, 0usize);
                for (i, &end) in subset.iter().zip(&final_correct) {
                    let now = cp.predict(i) == labels[i];
                    counts.0 += usize::from(now);
                    counts.1 += usize::from(now && !end);
                    counts.2 += usize::from(!now && end);
                }
                counts
            })?
        };
        curve.acc.push(fraction(correct, total));
        curve.forget.push(fraction(forgotten, total));
        curve.learn.push(fraction(learned, total));
        curve.correct_counts.push(correct);
        curve.forgotten_counts.push(forgotten);
        curve.learned_counts.push(learned);
    }
    Ok(curve)
}

/// Forget fraction of every checkpoint relative to an arbitrary current
/// predictor: the share of `subset` that the current predictor gets wrong and
/// checkpoint `e` gets right. `current` rows are aligned with `subset`.
///
/// With the final checkpoint as `current` this is exactly the `forget` field of
/// [`forget_learn_curve`].
pub fn generalized_forget<L: CheckpointSource + ?Sized>(
    current: &DenseProbs,
    log: &L,
    subset: &SubsetMask,
) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..log.n_checkpoints()).collect();
    Ok(forget_against(current, log, subset, &all)?.into_iter().map(|(_, f)| f).collect())
}

/// [`generalized_forget`] evaluated only at `checkpoints`.
pub(crate) fn forget_against<L: CheckpointSource + ?Sized>(
    current: &DenseProbs,
    log: &L,
    subset: &SubsetMask,
    checkpoints: &[usize],
) -> Result<Vec<(usize, f64)>> {
    subset.require_nonempty()?;
    subset.check_universe(log.n_examples())?;
    if current.shape() != (subset.len(), log.n_classes()) {
        return Err(Error::ShapeMismatch { expected: (subset.len(), log.n_classes()), actual: current.shape() });
    }
    let labels = log.labels();
    let mistakes: Vec<usize> = subset
        .iter()
        .enumerate()
        .filter(|&(row, i)| current.predict(row) != labels[i])
        .map(|(_, i)| i)
        .collect();
    let total = subset.len();
    checkpoints
        .iter()
        .map(|&k| {
            if mistakes.is_empty() {
                return Ok((k, 0.0));
            }
            let hits = log.with_checkpoint(k, |cp| mistakes.iter().filter(|&&i| cp.predict(i) == labels[i]).count())?;
            Ok((k, fraction(hits, total)))
        })
        .collect()
}

/// Share of examples correct at each checkpoint that are still correct at the
/// end. `None` where a checkpoint has no correct examples.
pub fn retention_curve<L: CheckpointSource + ?Sized>(log: &L, subset: &SubsetMask) -> Result<Vec<Option<f64>>> {
    let final_correct = correct_flags(log, log.last(), subset)?;
    let labels = log.labels();
    (0..log.n_checkpoints())
        .map(|k| {
            let (correct, kept) = if k == log.last() {
                let c = final_correct.iter().filter(|&&c| c).count();
                (c, c)
            } else {
                log.with_checkpoint(k, |cp| {
                    let mut counts = (0usize, 0usize);
                    for (i, &end) in subset.iter().zip(&final_correct) {
                        if cp.predict(i) == labels[i] {
                            counts.0 += 1;
                            counts.1 += usize::from(end);
                        }
                    }
                    counts
                })?
            };
            Ok((correct > 0).then(|| fraction(kept, correct)))
        })
        .collect()
}

/// Correct-checkpoint counts for every example the final checkpoint gets wrong,
/// plus the last checkpoint at which each was correct.
fn final_mistake_trajectories<L: CheckpointSource + ?Sized>(
    log: &L,
    subset: &SubsetMask,
) -> Result<(Vec<usize>, Vec<usize>, Vec<Option<usize>>)> {
    let final_correct = correct_flags(log, log.last(), subset)?;
    let mistakes: Vec<usize> = subset.iter().zip(&final_correct).filter(|&(_, &c)| !c).map(|(i, _)| i).collect();
    let labels = log.labels();
    let mut counts = alloc::vec![0usize; mistakes.len()];
    let mut last_correct = alloc::vec![None; mistakes.len()];
    if !mistakes.is_empty() {
        for k in 0..log.last() {
            log.with_checkpoint(k, |cp| {
                for (j, &i) in mistakes.iter().enumerate() {
                    if cp.predict(i) == labels[i] {
                        counts[j] += 1;
                        last_correct[j] = Some(k);
                    }
                }
            })?;
        }
    }
    Ok((mistakes, counts, last_correct))
}

/// For examples wrong at the end: how many checkpoints each was correct at.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PersistenceHistogram {
    /// Correct-checkpoint count -> number of examples. Only nonzero bins.
    pub bins: BTreeMap<usize, usize>,
    pub total: usize,
}

impl PersistenceHistogram {
    /// `(x, share of final mistakes correct for at least x checkpoints)` for
    /// `x = 0..=max_bin`. Empty when there are no final mistakes.
    pub fn at_least(&self) -> Vec<(usize, f64)> {
        let Some(&max) = self.bins.keys().next_back() else {
            return Vec::new();
        };
        let mut remaining = self.total;
        (0..=max)
            .map(|x| {
                let share = fraction(remaining, self.total);
                remaining -= self.bins.get(&x).copied().unwrap_or(0);
                (x, share)
            })
            .collect()
    }
}

pub fn persistence_histogram<L: CheckpointSource + ?Sized>(
    log: &L,
    subset: &SubsetMask,
) -> Result<PersistenceHistogram> {
    let (mistakes, counts, _) = final_mistake_trajectories(log, subset)?;
    let mut hist = PersistenceHistogram { bins: BTreeMap::new(), total: mistakes.len() };
    for c in counts {
        *hist.bins.entry(c).or_default() += 1;
    }
    Ok(hist)
}

/// For examples wrong at the end: the last checkpoint at which each was correct.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LastCorrectHistogram {
    /// Checkpoint index -> number of examples. Only nonzero bins.
    pub bins: BTreeMap<usize, usize>,
    /// Examples never correct at any checkpoint.
    pub never: usize,
}

pub fn last_correct_histogram<L: CheckpointSource + ?Sized>(
    log: &L,
    subset: &SubsetMask,
) -> Result<LastCorrectHistogram> {
    let (_, _, last_correct) = final_mistake_trajectories(log, subset)?;
    let mut hist = LastCorrectHistogram::default();
    for k in last_correct {
        match k {
            Some(k) => *hist.bins.entry(k).or_default() += 1,
            None => hist.never += 1,
        }
    }
    Ok(hist)
}

/// Chance-level cross-entropy, `ln C`.
pub fn default_loss_threshold(classes: usize) -> f64 {
    libm::log(classes as f64)
}

/// Per checkpoint: (clean examples with loss above `threshold`) minus (noisy
/// examples with loss above `threshold`). Loss is `-ln p(observed label)`; an
/// example is noisy when its observed label differs from its clean label.
pub fn large_loss_balance<L: CheckpointSource + ?Sized>(
    log: &L,
    threshold: f64,
    subset: &SubsetMask,
) -> Result<Vec<i64>> {
    let clean = log.clean_labels().ok_or(Error::MissingCleanLabels)?;
    subset.check_universe(log.n_examples())?;
    let labels = log.labels();
    (0..log.n_checkpoints())
        .map(|k| {
            log.with_checkpoint(k, |cp| {
                let mut balance = 0i64;
                for i in subset.iter() {
                    let loss = -libm::log(cp.prob(i, labels[i] as usize));
                    if loss > threshold {
                        balance += if labels[i] == clean[i] { 1 } else { -1 };
                    }
                }
                balance
            })
        })
        .collect()
}

/// Mean over classes of `max(a_c, b_c) / (a_c + b_c) - 0.5`, where `a_c` and
/// `b_c` count predictions of class `c` in each array. Classes predicted by
/// neither array are skipped.
pub fn amplification_bias(preds_a: &[u32], preds_b: &[u32], classes: usize) -> Result<f64> {
    if preds_a.is_empty() && preds_b.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let mut counts = alloc::vec![(0usize, 0usize); classes];
    for &p in preds_a {
        let slot = counts.get_mut(p as usize).ok_or(Error::LabelOutOfRange { index: 0, label: p, classes })?;
        slot.0 += 1;
    }
    for &p in preds_b {
        let slot = counts.get_mut(p as usize).ok_or(Error::LabelOutOfRange { index: 0, label: p, classes })?;
        slot.1 += 1;
    }
    let (sum, used) = counts
        .iter()
        .filter(|(a, b)| a + b > 0)
        .fold((0.0, 0usize), |(s, n), &(a, b)| (s + a.max(b) as f64 / (a + b) as f64, n + 1));
    Ok(sum / used as f64 - 0.5)
}
