//! Comparison predictors that only need stored outputs, plus an exhaustive
//! search over single fusion steps used to check the greedy fit.

use alloc::vec::Vec;

use crate::checkpoint::CheckpointSource;
use crate::error::{Error, Result};
use crate::fusion::{mean_of_checkpoints, EpsilonGrid};
use crate::metrics::correct_flags;
use crate::probs::DenseProbs;
use crate::subset::SubsetMask;

/// Largest instance [`oracle_fuse`] accepts.
pub const ORACLE_MAX_CHECKPOINTS: usize = 8;
pub const ORACLE_MAX_EXAMPLES: usize = 64;

/// Predictions of the final checkpoint.
pub fn single<L: CheckpointSource + ?Sized>(log: &L, subset: &SubsetMask) -> Result<Vec<u32>> {
    subset.check_universe(log.n_examples())?;
    log.with_checkpoint(log.last(), |cp| subset.iter().map(|i| cp.predict(i)).collect())
}

fn check_count(k: usize, len: usize) -> Result<()> {
    if k == 0 || k > len {
        Err(Error::CountOutOfRange { k, len })
    } else {
        Ok(())
    }
}

/// Mean of the last `k` checkpoints.
pub fn horizontal<L: CheckpointSource + ?Sized>(log: &L, k: usize, subset: &SubsetMask) -> Result<Vec<u32>> {
    let n = log.n_checkpoints();
    check_count(k, n)?;
    subset.check_universe(log.n_examples())?;
    Ok(mean_of_checkpoints(log, n - k..n, subset)?.predictions())
}

/// `k` checkpoint indices spread evenly over `[0, n - 1]`, first and last
/// included for `k >= 2`, rounded half up and deduplicated. `k = 1` is the
/// final checkpoint.
pub fn fixed_jump_indices(n: usize, k: usize) -> Result<Vec<usize>> {
    check_count(k, n)?;
    let last = n - 1;
    if k == 1 {
        return Ok(alloc::vec![last]);
    }
    let span = k - 1;
    let mut indices: Vec<usize> = (0..k).map(|j| (2 * j * last + span) / (2 * span)).collect();
    indices.dedup();
    Ok(indices)
}

/// Mean of `k` evenly spaced checkpoints.
pub fn fixed_jumps<L: CheckpointSource + ?Sized>(log: &L, k: usize, subset: &SubsetMask) -> Result<Vec<u32>> {
    let indices = fixed_jump_indices(log.n_checkpoints(), k)?;
    subset.check_universe(log.n_examples())?;
    Ok(mean_of_checkpoints(log, indices, subset)?.predictions())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStop {
    pub checkpoint: usize,
    pub epoch: u64,
    pub validation_accuracy: f64,
    pub predictions: Vec<u32>,
}

/// Earliest checkpoint with the best accuracy on `validation`, evaluated on `test`.
pub fn early_stopping<L: CheckpointSource + ?Sized>(
    log: &L,
    validation: &SubsetMask,
    test: &SubsetMask,
) -> Result<EarlyStop> {
    validation.require_nonempty()?;
    test.require_nonempty()?;
    test.check_universe(log.n_examples())?;
    let mut best = (0usize, 0usize);
    for k in 0..log.n_checkpoints() {
        let correct = correct_flags(log, k, validation)?.iter().filter(|&&c| c).count();
        if k == 0 || correct > best.1 {
            best = (k, correct);
        }
    }
    let checkpoint = best.0;
    let predictions = log.with_checkpoint(checkpoint, |cp| test.iter().map(|i| cp.predict(i)).collect())?;
    Ok(EarlyStop {
        checkpoint,
        epoch: log.epochs()[checkpoint],
        validation_accuracy: best.1 as f64 / validation.len() as f64,
        predictions,
    })
}

/// Which window centers [`oracle_fuse`] enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCandidates {
    /// Every checkpoint except the final one.
    AllNonFinal,
    /// Only the earliest checkpoint with the largest forget fraction relative
    /// to the final checkpoint.
    ArgmaxForget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleChoice {
    pub checkpoint: usize,
    pub epsilon_units: u32,
    pub epsilon: f64,
    pub correct: usize,
    pub accuracy: f64,
}

fn naive_argmax(row: &[f64]) -> u32 {
    let mut best = 0;
    for c in 1..row.len() {
        if row[c] > row[best] {
            best = c;
        }
    }
    best as u32
}

/// Exhaustive single-step fusion: every candidate center and every grid weight,
/// maximizing validation accuracy; ties go to the smaller weight, then the
/// earlier center. Written without the fusion module's search machinery so the
/// two can be compared.
pub fn oracle_fuse<L: CheckpointSource + ?Sized>(
    log: &L,
    validation: &SubsetMask,
    window: usize,
    grid: EpsilonGrid,
    candidates: OracleCandidates,
) -> Result<OracleChoice> {
    let n_cp = log.n_checkpoints();
    if n_cp > ORACLE_MAX_CHECKPOINTS || log.n_examples() > ORACLE_MAX_EXAMPLES {
        return Err(Error::InstanceTooLarge { checkpoints: n_cp, examples: log.n_examples() });
    }
    if n_cp < 2 {
        return Err(Error::TooFewCheckpoints { needed: 2, available: n_cp });
    }
    validation.require_nonempty()?;
    validation.check_universe(log.n_examples())?;
    let classes = log.n_classes();
    let labels = log.labels();
    let members: Vec<usize> = validation.iter().collect();
    let last = n_cp - 1;

    // tables[k][j][c]: renormalized probability of checkpoint k, member j, class c
    let mut tables: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_cp);
    for k in 0..n_cp {
        tables.push(log.with_checkpoint(k, |cp| {
            members.iter().map(|&i| (0..classes).map(|c| cp.prob(i, c)).collect()).collect()
        })?);
    }
    let right = |k: usize, j: usize| naive_argmax(&tables[k][j]) == labels[members[j]];

    let centers: Vec<usize> = match candidates {
        OracleCandidates::AllNonFinal => (0..last).collect(),
        OracleCandidates::ArgmaxForget => {
            let mut best = (0usize, 0usize);
            for k in 0..last {
                let forgotten = (0..members.len()).filter(|&j| !right(last, j) && right(k, j)).count();
                if k == 0 || forgotten > best.1 {
                    best = (k, forgotten);
                }
            }
            alloc::vec![best.0]
        }
    };

    let averages: Vec<DenseProbs> = centers
        .iter()
        .map(|&a| {
            let lo = a.saturating_sub(window);
            let hi = (a + window).min(last);
            let mut data = alloc::vec![0.0; members.len() * classes];
            for k in lo..=hi {
                for j in 0..members.len() {
                    for c in 0..classes {
                        data[j * classes + c] += tables[k][j][c];
                    }
                }
            }
            let count = (hi - lo + 1) as f64;
            for v in &mut data {
                *v /= count;
            }
            DenseProbs::from_vec(members.len(), classes, data)
        })
        .collect::<Result<_>>()?;

    let mut best: Option<OracleChoice> = None;
    let mut row = alloc::vec![0.0; classes];
    for units in 0..=grid.steps() {
        let eps = grid.value(units);
        for (a, avg) in centers.iter().zip(&averages) {
            let mut correct = 0;
            for j in 0..members.len() {
                for c in 0..classes {
                    row[c] = eps * avg.row(j)[c] + (1.0 - eps) * tables[last][j][c];
                }
                if naive_argmax(&row) == labels[members[j]] {
                    correct += 1;
                }
            }
            if best.is_none_or(|b| correct > b.correct) {
                best = Some(OracleChoice {
                    checkpoint: *a,
                    epsilon_units: units,
                    epsilon: eps,
                    correct,
                    accuracy: correct as f64 / members.len() as f64,
                });
            }
        }
    }
    Ok(best.expect("at least one candidate"))
}
