#![allow(dead_code)]

pub use fusekit_core::fixtures::random_log;
use fusekit_core::{Checkpoint, CheckpointSource, MemoryLog};

/// Row `i` of checkpoint `cp`, renormalized, computed from the raw slice.
pub fn naive_row(cp: &Checkpoint, i: usize) -> Vec<f64> {
    let c = cp.classes();
    let raw = &cp.raw()[i * c..(i + 1) * c];
    let sum: f64 = raw.iter().map(|&v| v as f64).sum();
    raw.iter().map(|&v| v as f64 / sum).collect()
}

pub fn naive_argmax(row: &[f64]) -> u32 {
    let mut best = 0;
    for c in 0..row.len() {
        if row[c] > row[best] {
            best = c;
        }
    }
    best as u32
}

/// `correct[k][i]` for every checkpoint and example.
pub fn naive_correct(log: &MemoryLog) -> Vec<Vec<bool>> {
    log.checkpoints()
        .iter()
        .map(|cp| (0..log.n_examples()).map(|i| naive_argmax(&naive_row(cp, i)) == log.labels()[i]).collect())
        .collect()
}

/// The same log with examples reordered: new example `j` is old example `perm[j]`.
pub fn permute(log: &MemoryLog, perm: &[usize]) -> MemoryLog {
    let c = log.n_classes();
    let labels = perm.iter().map(|&i| log.labels()[i]).collect();
    let clean = log.clean_labels().map(|cl| perm.iter().map(|&i| cl[i]).collect());
    let matrices = log
        .checkpoints()
        .iter()
        .map(|cp| perm.iter().flat_map(|&i| cp.raw()[i * c..(i + 1) * c].to_vec()).collect())
        .collect();
    MemoryLog::from_matrices(c, log.epochs().to_vec(), labels, clean, matrices).unwrap()
}
