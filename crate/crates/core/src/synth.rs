//! Synthetic prediction logs with exact ground truth.
//!
//! Every example follows a piecewise-constant trajectory: it is predicted as a
//! fixed wrong class until its learn checkpoint, as its observed label from
//! then on, and, for members of a forget cohort, as the wrong class again from
//! its forget checkpoint. Rows put `confidence` on the predicted class and
//! spread the remainder evenly, so the argmax is always the intended class and
//! forget/learning fractions follow in closed form from the learn and forget
//! times.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Checkpoint, CheckpointSource, MemoryLog};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum NoiseKind {
    #[default]
    None,
    /// Selected labels move to a uniformly drawn other class.
    Symmetric,
    /// Selected labels move to `(label + 1) mod C`.
    Asymmetric,
}

/// Inclusive checkpoint-index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckpointRange {
    pub start: usize,
    pub end: usize,
}

impl CheckpointRange {
    pub const fn new(start: usize, end: usize) -> Self {
        CheckpointRange { start, end }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(self.start..=self.end)
    }
}

/// A share of the non-cohort clean examples and the range their learn times
/// are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnPhase {
    pub share: f64,
    pub range: CheckpointRange,
}

/// Clean examples that are learned and later forgotten.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForgetCohort {
    /// Share of all examples in the cohort.
    pub fraction: f64,
    pub learn: CheckpointRange,
    pub forget: CheckpointRange,
}

/// What a noisy example is predicted as before its noisy label is memorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoisyPrelearn {
    /// Its clean label.
    #[default]
    CleanLabel,
    /// A seeded class different from its observed label.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrajectorySpec {
    pub examples: usize,
    pub classes: usize,
    pub checkpoints: usize,
    /// Epoch id of checkpoint `k` is `(k + 1) * epoch_stride`.
    pub epoch_stride: u64,
    pub noise_rate: f64,
    pub noise_kind: NoiseKind,
    /// Learn-time distribution of clean examples outside every cohort.
    pub learn: Vec<LearnPhase>,
    /// Learn-time range of noisy examples; defaults to `learn`.
    pub noisy_learn: Option<CheckpointRange>,
    pub noisy_prelearn: NoisyPrelearn,
    pub cohorts: Vec<ForgetCohort>,
    /// Probability mass on the predicted class, in `(1/C, 1]`.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            examples: 1000,
            classes: 10,
            checkpoints: 30,
            epoch_stride: 1,
            noise_rate: 0.0,
            noise_kind: NoiseKind::None,
            learn: vec![LearnPhase { share: 1.0, range: CheckpointRange::new(0, 9) }],
            noisy_learn: None,
            noisy_prelearn: NoisyPrelearn::CleanLabel,
            cohorts: Vec::new(),
            confidence: 0.7,
            seed: 0,
        }
    }
}

impl TrajectorySpec {
    /// Combined share of all forget cohorts.
    pub fn forget_fraction(&self) -> f64 {
        self.cohorts.iter().map(|c| c.fraction).sum()
    }

    pub fn epochs(&self) -> Vec<u64> {
        (1..=self.checkpoints as u64).map(|k| k * self.epoch_stride).collect()
    }

    fn noisy_count(&self) -> usize {
        if self.noise_kind == NoiseKind::None {
            0
        } else {
            round_count(self.noise_rate, self.examples)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.examples == 0 || self.checkpoints == 0 {
            return bad(String::from("examples and checkpoints must be positive"));
        }
        if self.classes < 2 {
            return Err(Error::TooFewClasses { classes: self.classes });
        }
        if self.epoch_stride == 0 {
            return bad(String::from("epoch_stride must be positive"));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return bad(format!("noise rate {} outside [0, 1)", self.noise_rate));
        }
        let (on, off) = row_values(self.confidence, self.classes);
        if !(self.confidence <= 1.0 && on > off) {
            return bad(format!("confidence {} must lie in (1/C, 1]", self.confidence));
        }
        let in_range = |r: &CheckpointRange| r.start <= r.end && r.end < self.checkpoints;
        if self.learn.is_empty() {
            return bad(String::from("at least one learn phase is required"));
        }
        let mut share = 0.0;
        for phase in &self.learn {
            if !in_range(&phase.range) || !(phase.share >= 0.0) {
                return bad(format!("bad learn phase {phase:?}"));
            }
            share += phase.share;
        }
        if (share - 1.0).abs() > 1e-9 {
            return bad(format!("learn phase shares sum to {share}, not 1"));
        }
        if let Some(r) = &self.noisy_learn {
            if !in_range(r) {
                return bad(format!("bad noisy learn range {r:?}"));
            }
        }
        for cohort in &self.cohorts {
            if !in_range(&cohort.learn) || !in_range(&cohort.forget) || cohort.learn.end >= cohort.forget.start {
                return bad(format!("cohort ranges must satisfy learn < forget within the log: {cohort:?}"));
            }
            if !(0.0..1.0).contains(&cohort.fraction) {
                return bad(format!("cohort fraction {} outside [0, 1)", cohort.fraction));
            }
        }
        let cohort_members: usize = self.cohorts.iter().map(|c| round_count(c.fraction, self.examples)).sum();
        if cohort_members + self.noisy_count() > self.examples {
            return bad(String::from("cohorts and noisy examples exceed the number of examples"));
        }
        Ok(())
    }
}

fn round_count(fraction: f64, n: usize) -> usize {
    libm::round(fraction * n as f64) as usize
}

/// Single-precision (on, off) values of a row for `confidence` and `classes`.
fn row_values(confidence: f64, classes: usize) -> (f32, f32) {
    (confidence as f32, ((1.0 - confidence) / (classes - 1) as f64) as f32)
}

/// Relabels exactly `round(p * N)` uniformly chosen examples.
pub fn inject_noise(clean: &[u32], p: f64, kind: NoiseKind, classes: usize, seed: u64) -> Result<Vec<u32>> {
    if classes < 2 {
        return Err(Error::TooFewClasses { classes });
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidSpec(format!("noise rate {p} outside [0, 1)")));
    }
    let mut labels = clean.to_vec();
    if kind == NoiseKind::None {
        return Ok(labels);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = round_count(p, clean.len());
    for i in sample(&mut rng, clean.len(), count) {
        let y = clean[i];
        labels[i] = match kind {
            NoiseKind::Symmetric => {
                let r = rng.gen_range(0..classes as u32 - 1);
                if r >= y { r + 1 } else { r }
            }
            NoiseKind::Asymmetric => (y + 1) % classes as u32,
            NoiseKind::None => unreachable!(),
        };
    }
    Ok(labels)
}

/// Exact per-example trajectory parameters of a generated log.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub checkpoints: usize,
    pub learn: Vec<usize>,
    pub forget: Vec<Option<usize>>,
    pub cohort: Vec<Option<usize>>,
    pub noisy: Vec<bool>,
    /// Class predicted before learning and after forgetting.
    pub wrong_class: Vec<u32>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.learn.len()
    }

    pub fn is_empty(&self) -> bool {
        self.learn.is_empty()
    }

    /// Whether example `i` is predicted as its observed label at checkpoint `k`.
    pub fn predicts_label(&self, i: usize, k: usize) -> bool {
        self.learn[i] <= k && self.forget[i].is_none_or(|f| k < f)
    }
}

/// Forget and learning fractions over all examples, from trajectory parameters alone.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthCurve {
    pub acc: Vec<f64>,
    pub forget: Vec<f64>,
    pub learn: Vec<f64>,
}

pub fn ground_truth_curve(truth: &GroundTruth, checkpoints: usize) -> GroundTruthCurve {
    let n = truth.len();
    let last = checkpoints - 1;
    let mut curve = GroundTruthCurve { acc: Vec::new(), forget: Vec::new(), learn: Vec::new() };
    for k in 0..checkpoints {
        let (mut correct, mut forgotten, mut learned) = (0usize, 0usize, 0usize);
        for i in 0..n {
            let now = truth.predicts_label(i, k);
            let end = truth.predicts_label(i, last);
            correct += usize::from(now);
            forgotten += usize::from(now && !end);
            learned += usize::from(!now && end);
        }
        curve.acc.push(correct as f64 / n as f64);
        curve.forget.push(forgotten as f64 / n as f64);
        curve.learn.push(learned as f64 / n as f64);
    }
    curve
}

/// A generated log that materializes each checkpoint on demand.
#[derive(Debug, Clone)]
pub struct SyntheticLog {
    classes: usize,
    epochs: Vec<u64>,
    labels: Vec<u32>,
    clean_labels: Vec<u32>,
    truth: GroundTruth,
    on: f32,
    off: f32,
}

impl SyntheticLog {
    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Row-major `[N x C]` values of checkpoint `k`.
    pub fn matrix(&self, k: usize) -> Vec<f32> {
        let mut m = vec![self.off; self.labels.len() * self.classes];
        for i in 0..self.labels.len() {
            let class = if self.truth.predicts_label(i, k) { self.labels[i] } else { self.truth.wrong_class[i] };
            m[i * self.classes + class as usize] = self.on;
        }
        m
    }

    pub fn to_memory(&self) -> Result<MemoryLog> {
        MemoryLog::from_matrices(
            self.classes,
            self.epochs.clone(),
            self.labels.clone(),
            Some(self.clean_labels.clone()),
            (0..self.epochs.len()).map(|k| self.matrix(k)).collect(),
        )
    }
}

impl CheckpointSource for SyntheticLog {
    fn n_examples(&self) -> usize {
        self.labels.len()
    }
    fn n_classes(&self) -> usize {
        self.classes
    }
    fn epochs(&self) -> &[u64] {
        &self.epochs
    }
    fn labels(&self) -> &[u32] {
        &self.labels
    }
    fn clean_labels(&self) -> Option<&[u32]> {
        Some(&self.clean_labels)
    }
    fn with_checkpoint<R>(&self, index: usize, f: impl FnOnce(&Checkpoint) -> R) -> Result<R> {
        if index >= self.epochs.len() {
            return Err(Error::CheckpointOutOfRange { index, len: self.epochs.len() });
        }
        let cp = Checkpoint::from_raw(index, self.labels.len(), self.classes, self.matrix(index))?;
        Ok(f(&cp))
    }
}

const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Draws trajectories for `spec` without materializing any checkpoint.
pub fn generate_lazy(spec: &TrajectorySpec) -> Result<SyntheticLog> {
    spec.validate()?;
    let n = spec.examples;
    let classes = spec.classes as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let clean_labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    let labels = inject_noise(&clean_labels, spec.noise_rate, spec.noise_kind, spec.classes, spec.seed ^ NOISE_STREAM)?;
    let noisy: Vec<bool> = labels.iter().zip(&clean_labels).map(|(a, b)| a != b).collect();

    let mut learn = vec![0usize; n];
    let mut forget = vec![None; n];
    let mut cohort = vec![None; n];

    let mut clean_pool: Vec<usize> = (0..n).filter(|&i| !noisy[i]).collect();
    clean_pool.shuffle(&mut rng);
    for (id, c) in spec.cohorts.iter().enumerate() {
        let take = round_count(c.fraction, n);
        for i in clean_pool.drain(..take) {
            cohort[i] = Some(id);
            learn[i] = c.learn.draw(&mut rng);
            forget[i] = Some(c.forget.draw(&mut rng));
        }
    }

    // exact phase counts over the remaining clean examples, remainder to the earliest phases
    let m = clean_pool.len();
    let mut counts: Vec<usize> = spec.learn.iter().map(|p| libm::floor(p.share * m as f64) as usize).collect();
    let mut remainder = m - counts.iter().sum::<usize>().min(m);
    for c in counts.iter_mut() {
        if remainder == 0 {
            break;
        }
        *c += 1;
        remainder -= 1;
    }
    let mut assigned = 0;
    for (phase, &count) in spec.learn.iter().zip(&counts) {
        for &i in clean_pool[assigned..(assigned + count).min(m)].iter() {
            learn[i] = phase.range.draw(&mut rng);
        }
        assigned = (assigned + count).min(m);
    }

    for i in (0..n).filter(|&i| noisy[i]) {
        learn[i] = match &spec.noisy_learn {
            Some(r) => r.draw(&mut rng),
            None => {
                let phase = pick_phase(&spec.learn, &mut rng);
                phase.range.draw(&mut rng)
            }
        };
    }

    let wrong_class: Vec<u32> = (0..n)
        .map(|i| {
            if noisy[i] && spec.noisy_prelearn == NoisyPrelearn::CleanLabel {
                clean_labels[i]
            } else {
                let r = rng.gen_range(0..classes - 1);
                if r >= labels[i] { r + 1 } else { r }
            }
        })
        .collect();

    let (on, off) = row_values(spec.confidence, spec.classes);
    Ok(SyntheticLog {
        classes: spec.classes,
        epochs: spec.epochs(),
        labels,
        clean_labels,
        truth: GroundTruth { checkpoints: spec.checkpoints, learn, forget, cohort, noisy, wrong_class },
        on,
        off,
    })
}

fn pick_phase<'a>(phases: &'a [LearnPhase], rng: &mut ChaCha8Rng) -> &'a LearnPhase {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for p in phases {
        acc += p.share;
        if u < acc {
            return p;
        }
    }
    phases.last().expect("validated nonempty")
}

/// Generates a fully resident log and its ground truth.
pub fn generate(spec: &TrajectorySpec) -> Result<(MemoryLog, GroundTruth)> {
    let lazy = generate_lazy(spec)?;
    Ok((lazy.to_memory()?, lazy.truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{accuracy, forget_learn_curve};
    use crate::subset::SubsetMask;

    #[test]
    fn zero_noise_leaves_labels() {
        let clean: Vec<u32> = (0..50).map(|i| i % 5).collect();
        assert_eq!(inject_noise(&clean, 0.0, NoiseKind::Symmetric, 5, 1).unwrap(), clean);
        assert_eq!(inject_noise(&clean, 0.5, NoiseKind::None, 5, 1).unwrap(), clean);
    }

    #[test]
    fn asymmetric_is_plus_one() {
        let clean = [0, 1, 2];
        // p = 0.99 on 3 examples rounds to all 3 selected
        assert_eq!(inject_noise(&clean, 0.99, NoiseKind::Asymmetric, 3, 7).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn symmetric_changes_exact_count() {
        let clean: Vec<u32> = (0..1000).map(|i| (i * 7 % 10) as u32).collect();
        let noisy = inject_noise(&clean, 0.4, NoiseKind::Symmetric, 10, 42).unwrap();
        assert_eq!(noisy.iter().zip(&clean).filter(|(a, b)| a != b).count(), 400);
        assert!(noisy.iter().all(|&y| y < 10));
    }

    #[test]
    fn noise_needs_two_classes() {
        assert!(matches!(inject_noise(&[0], 0.1, NoiseKind::Symmetric, 1, 0), Err(Error::TooFewClasses { .. })));
        assert!(inject_noise(&[0], 1.0, NoiseKind::Symmetric, 2, 0).is_err());
    }

    #[test]
    fn all_learned_at_start_is_perfect() {
        let spec = TrajectorySpec {
            examples: 100,
            checkpoints: 5,
            learn: vec![LearnPhase { share: 1.0, range: CheckpointRange::new(0, 0) }],
            ..TrajectorySpec::default()
        };
        let (log, _) = generate(&spec).unwrap();
        let s = SubsetMask::all(100);
        for k in 0..5 {
            assert_eq!(accuracy(&log, k, &s).unwrap(), 1.0);
        }
    }

    #[test]
    fn cohort_forgetting_matches_ground_truth() {
        let spec = TrajectorySpec {
            examples: 200,
            checkpoints: 12,
            learn: vec![LearnPhase { share: 1.0, range: CheckpointRange::new(0, 2) }],
            cohorts: vec![ForgetCohort {
                fraction: 0.1,
                learn: CheckpointRange::new(1, 3),
                forget: CheckpointRange::new(7, 9),
            }],
            seed: 3,
            ..TrajectorySpec::default()
        };
        let (log, truth) = generate(&spec).unwrap();
        let s = SubsetMask::all(200);
        assert_eq!(accuracy(&log, 11, &s).unwrap(), 0.9);
        let curve = forget_learn_curve(&log, &s).unwrap();
        let gt = ground_truth_curve(&truth, 12);
        assert_eq!(curve.forget, gt.forget);
        assert_eq!(curve.learn, gt.learn);
        assert_eq!(curve.acc, gt.acc);
        // cohort fully learned by 3, first forget at 7 or later
        for k in 3..7 {
            assert_eq!(curve.forget[k], 0.1);
        }
        assert!(curve.forget.iter().all(|&f| f <= 0.1));
    }

    #[test]
    fn same_seed_same_log() {
        let spec = TrajectorySpec { examples: 64, checkpoints: 6, noise_rate: 0.25, noise_kind: NoiseKind::Symmetric, seed: 9, ..TrajectorySpec::default() };
        let spec = TrajectorySpec { learn: vec![LearnPhase { share: 1.0, range: CheckpointRange::new(0, 5) }], ..spec };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = TrajectorySpec { seed: 10, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap().0, generate(&other).unwrap().0);
    }

    #[test]
    fn invalid_specs() {
        let base = TrajectorySpec::default();
        let low_conf = TrajectorySpec { confidence: 0.1, ..base.clone() };
        assert!(low_conf.validate().is_err());
        let cohort_overlap = TrajectorySpec {
            cohorts: vec![ForgetCohort { fraction: 0.1, learn: CheckpointRange::new(0, 5), forget: CheckpointRange::new(5, 9) }],
            ..base.clone()
        };
        assert!(cohort_overlap.validate().is_err());
        let out_of_range = TrajectorySpec {
            learn: vec![LearnPhase { share: 1.0, range: CheckpointRange::new(0, 30) }],
            ..base.clone()
        };
        assert!(out_of_range.validate().is_err());
        let shares = TrajectorySpec {
            learn: vec![LearnPhase { share: 0.5, range: CheckpointRange::new(0, 3) }],
            ..base
        };
        assert!(shares.validate().is_err());
    }
}
