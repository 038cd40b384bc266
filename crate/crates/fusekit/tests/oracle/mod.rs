//! Naive reference computations over fully resident logs, written directly
//! from the definitions without the library's streaming passes.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fusekit_core::{Checkpoint, CheckpointSource, MemoryLog};

/// Row `i` of `cp`, renormalized from the raw stored values.
pub fn row(cp: &Checkpoint, i: usize) -> Vec<f64> {
    let c = cp.classes();
    let raw = &cp.raw()[i * c..(i + 1) * c];
    let sum: f64 = raw.iter().map(|&v| v as f64).sum();
    raw.iter().map(|&v| v as f64 / sum).collect()
}

/// First index of the maximum.
pub fn argmax(row: &[f64]) -> u32 {
    let mut best = 0;
    for c in 1..row.len() {
        if row[c] > row[best] {
            best = c;
        }
    }
    best as u32
}

pub fn predictions(cp: &Checkpoint) -> Vec<u32> {
    (0..cp.rows()).map(|i| argmax(&row(cp, i))).collect()
}

/// `table[k][i]`: checkpoint `k` predicts `labels[i]` for example `i`.
pub fn correct_table(log: &MemoryLog, labels: &[u32]) -> Vec<Vec<bool>> {
    log.checkpoints()
        .iter()
        .map(|cp| predictions(cp).iter().zip(labels).map(|(p, y)| p == y).collect())
        .collect()
}

pub struct Curves {
    pub acc: Vec<f64>,
    pub forget: Vec<f64>,
    pub learn: Vec<f64>,
}

/// Forget and learning fractions from the mistake-set definitions:
/// `F_e = acc(e, M_E) |M_E| / |T|`, `L_e = acc(E, M_e) |M_e| / |T|`.
pub fn curves(table: &[Vec<bool>], members: &[usize]) -> Curves {
    let last = table.len() - 1;
    let t = members.len() as f64;
    let mistakes = |k: usize| -> Vec<usize> { members.iter().copied().filter(|&i| !table[k][i]).collect() };
    let acc_on = |k: usize, set: &[usize]| -> f64 {
        set.iter().filter(|&&i| table[k][i]).count() as f64 / set.len() as f64
    };
    let m_final = mistakes(last);
    let mut out = Curves { acc: vec![], forget: vec![], learn: vec![] };
    for k in 0..table.len() {
        let m_k = mistakes(k);
        out.acc.push(members.iter().filter(|&&i| table[k][i]).count() as f64 / t);
        out.forget.push(if m_final.is_empty() { 0.0 } else { acc_on(k, &m_final) * m_final.len() as f64 / t });
        out.learn.push(if m_k.is_empty() { 0.0 } else { acc_on(last, &m_k) * m_k.len() as f64 / t });
    }
    out
}

pub fn retention(table: &[Vec<bool>], members: &[usize]) -> Vec<Option<f64>> {
    let last = table.len() - 1;
    (0..table.len())
        .map(|k| {
            let right: Vec<usize> = members.iter().copied().filter(|&i| table[k][i]).collect();
            let kept = right.iter().filter(|&&i| table[last][i]).count();
            (!right.is_empty()).then(|| kept as f64 / right.len() as f64)
        })
        .collect()
}

/// (persistence bins, last-correct bins, never correct) over final mistakes.
pub fn histograms(
    table: &[Vec<bool>],
    members: &[usize],
) -> (BTreeMap<usize, usize>, BTreeMap<usize, usize>, usize) {
    let last = table.len() - 1;
    let mut persistence = BTreeMap::new();
    let mut last_correct = BTreeMap::new();
    let mut never = 0;
    for &i in members.iter().filter(|&&i| !table[last][i]) {
        let times: Vec<usize> = (0..table.len()).filter(|&k| table[k][i]).collect();
        *persistence.entry(times.len()).or_insert(0) += 1;
        match times.last() {
            Some(&k) => *last_correct.entry(k).or_insert(0) += 1,
            None => never += 1,
        }
    }
    (persistence, last_correct, never)
}

/// Share of final mistakes correct at `x` or more checkpoints, for `x = 0..=max`.
pub fn at_least(persistence: &BTreeMap<usize, usize>) -> Vec<(usize, f64)> {
    let total: usize = persistence.values().sum();
    let Some(&max) = persistence.keys().last() else { return vec![] };
    (0..=max)
        .map(|x| {
            let n = persistence.iter().filter(|&(&c, _)| c >= x).map(|(_, &n)| n).sum::<usize>();
            (x, n as f64 / total as f64)
        })
        .collect()
}

pub fn loss_balance(log: &MemoryLog, threshold: f64, members: &[usize]) -> Vec<i64> {
    let labels = log.labels();
    let clean = log.clean_labels().expect("clean labels");
    log.checkpoints()
        .iter()
        .map(|cp| {
            members
                .iter()
                .map(|&i| {
                    let loss = -row(cp, i)[labels[i] as usize].ln();
                    match (loss > threshold, labels[i] == clean[i]) {
                        (false, _) => 0,
                        (true, true) => 1,
                        (true, false) => -1,
                    }
                })
                .sum()
        })
        .collect()
}

/// Mean over classes predicted by either array of `max(a, b) / (a + b)`, minus 1/2.
pub fn amplification_bias(a: &[u32], b: &[u32], classes: usize) -> f64 {
    let mut sum = 0.0;
    let mut used = 0;
    for class in 0..classes as u32 {
        let ca = a.iter().filter(|&&p| p == class).count();
        let cb = b.iter().filter(|&&p| p == class).count();
        if ca + cb > 0 {
            sum += ca.max(cb) as f64 / (ca + cb) as f64;
            used += 1;
        }
    }
    sum / used as f64 - 0.5
}
