//! Per-checkpoint probability matrices and the source abstraction over logs.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Maximum allowed deviation of a stored row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

/// Index of the largest value, lowest index on ties.
pub fn argmax<I: IntoIterator<Item = f64>>(row: I) -> u32 {
    let mut best = 0u32;
    let mut best_value = f64::NEG_INFINITY;
    for (class, value) in row.into_iter().enumerate() {
        if value > best_value {
            best_value = value;
            best = class as u32;
        }
    }
    best
}

/// Scan a row-major `[rows x classes]` single-precision matrix and report every
/// entry outside `[0, 1]` and every row whose sum is not within
/// [`ROW_SUM_TOLERANCE`] of 1. Returns the f64 row sums.
pub fn scan_rows(
    checkpoint: usize,
    classes: usize,
    raw: &[f32],
    mut on_violation: impl FnMut(Error),
) -> Vec<f64> {
    let mut sums = Vec::with_capacity(raw.len() / classes.max(1));
    for (row, values) in raw.chunks_exact(classes).enumerate() {
        let mut sum = 0.0f64;
        for (class, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                on_violation(Error::EntryOutOfRange { checkpoint, row, class, value });
            }
            sum += f64::from(value);
        }
        if !((sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
            on_violation(Error::RowSum { checkpoint, row, sum });
        }
        sums.push(sum);
    }
    sums
}

/// The `[N x C]` class-probability matrix of one checkpoint.
///
/// Raw single-precision values are kept bit-exact; reads go through
/// [`Checkpoint::prob`], which renormalizes each row in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    classes: usize,
    raw: Vec<f32>,
    row_sums: Vec<f64>,
}

impl Checkpoint {
    /// Validates `raw` as a row-major `[rows x classes]` matrix. `index` is the
    /// checkpoint index used in error coordinates.
    pub fn from_raw(index: usize, rows: usize, classes: usize, raw: Vec<f32>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses { classes });
        }
        if raw.len() != rows * classes {
            return Err(Error::LengthMismatch {
                what: "checkpoint matrix",
                expected: rows * classes,
                actual: raw.len(),
            });
        }
        let mut first = None;
        let row_sums = scan_rows(index, classes, &raw, |e| {
            first.get_or_insert(e);
        });
        match first {
            Some(e) => Err(e),
            None => Ok(Checkpoint { classes, raw, row_sums }),
        }
    }

    pub fn rows(&self) -> usize {
        self.row_sums.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Stored values, exactly as written.
    pub fn raw(&self) -> &[f32] {
        &self.raw
    }

    pub fn into_raw(self) -> Vec<f32> {
        self.raw
    }

    /// Renormalized probability of `class` for example `row`.
    #[inline]
    pub fn prob(&self, row: usize, class: usize) -> f64 {
        f64::from(self.raw[row * self.classes + class]) / self.row_sums[row]
    }

    /// Writes the renormalized row into `out` (length `classes`).
    #[inline]
    pub fn row_into(&self, row: usize, out: &mut [f64]) {
        let sum = self.row_sums[row];
        let values = &self.raw[row * self.classes..(row + 1) * self.classes];
        for (o, &v) in out.iter_mut().zip(values) {
            *o = f64::from(v) / sum;
        }
    }

    #[inline]
    pub fn predict(&self, row: usize) -> u32 {
        argmax((0..self.classes).map(|c| self.prob(row, c)))
    }

    pub fn predictions(&self) -> Vec<u32> {
        (0..self.rows()).map(|i| self.predict(i)).collect()
    }
}

/// Read access to a prediction log.
///
/// Checkpoints are lent to a closure rather than returned so that streaming
/// implementations can release each matrix as soon as the caller is done.
pub trait CheckpointSource {
    fn n_examples(&self) -> usize;
    fn n_classes(&self) -> usize;
    /// Epoch id of every stored checkpoint, strictly increasing.
    fn epochs(&self) -> &[u64];
    fn labels(&self) -> &[u32];
    fn clean_labels(&self) -> Option<&[u32]>;
    fn with_checkpoint<R>(&self, index: usize, f: impl FnOnce(&Checkpoint) -> R) -> Result<R>;

    fn n_checkpoints(&self) -> usize {
        self.epochs().len()
    }

    /// Index of the final checkpoint.
    fn last(&self) -> usize {
        self.n_checkpoints() - 1
    }

    fn checkpoint_of_epoch(&self, epoch: u64) -> Result<usize> {
        self.epochs().binary_search(&epoch).map_err(|_| Error::UnknownEpoch(epoch))
    }
}

impl<T: CheckpointSource + ?Sized> CheckpointSource for &T {
    fn n_examples(&self) -> usize {
        (**self).n_examples()
    }
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn epochs(&self) -> &[u64] {
        (**self).epochs()
    }
    fn labels(&self) -> &[u32] {
        (**self).labels()
    }
    fn clean_labels(&self) -> Option<&[u32]> {
        (**self).clean_labels()
    }
    fn with_checkpoint<R>(&self, index: usize, f: impl FnOnce(&Checkpoint) -> R) -> Result<R> {
        (**self).with_checkpoint(index, f)
    }
}

/// Checks the log-level invariants shared by every source: shape, labels and
/// epoch ordering.
pub fn check_header(
    n_examples: usize,
    n_classes: usize,
    epochs: &[u64],
    labels: &[u32],
    clean_labels: Option<&[u32]>,
) -> Result<()> {
    if n_examples == 0 {
        return Err(Error::NoExamples);
    }
    if n_classes < 2 {
        return Err(Error::TooFewClasses { classes: n_classes });
    }
    if epochs.is_empty() {
        return Err(Error::NoCheckpoints);
    }
    if epochs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::EpochsNotIncreasing);
    }
    check_labels(labels, n_examples, n_classes)?;
    if let Some(clean) = clean_labels {
        check_labels(clean, n_examples, n_classes)?;
    }
    Ok(())
}

fn check_labels(labels: &[u32], n_examples: usize, n_classes: usize) -> Result<()> {
    if labels.len() != n_examples {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: n_examples,
            actual: labels.len(),
        });
    }
    match labels.iter().position(|&l| l as usize >= n_classes) {
        Some(index) => Err(Error::LabelOutOfRange { index, label: labels[index], classes: n_classes }),
        None => Ok(()),
    }
}

/// A fully resident prediction log.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryLog {
    n_classes: usize,
    epochs: Vec<u64>,
    labels: Vec<u32>,
    clean_labels: Option<Vec<u32>>,
    checkpoints: Vec<Checkpoint>,
}

impl MemoryLog {
    pub fn new(
        epochs: Vec<u64>,
        labels: Vec<u32>,
        clean_labels: Option<Vec<u32>>,
        checkpoints: Vec<Checkpoint>,
    ) -> Result<Self> {
        let n_classes = checkpoints.first().ok_or(Error::NoCheckpoints)?.classes();
        let n_examples = labels.len();
        check_header(n_examples, n_classes, &epochs, &labels, clean_labels.as_deref())?;
        if checkpoints.len() != epochs.len() {
            return Err(Error::LengthMismatch {
                what: "checkpoints",
                expected: epochs.len(),
                actual: checkpoints.len(),
            });
        }
        for cp in &checkpoints {
            if cp.rows() != n_examples || cp.classes() != n_classes {
                return Err(Error::ShapeMismatch {
                    expected: (n_examples, n_classes),
                    actual: (cp.rows(), cp.classes()),
                });
            }
        }
        Ok(MemoryLog { n_classes, epochs, labels, clean_labels, checkpoints })
    }

    /// Builds a log from raw row-major matrices, validating every row.
    pub fn from_matrices(
        n_classes: usize,
        epochs: Vec<u64>,
        labels: Vec<u32>,
        clean_labels: Option<Vec<u32>>,
        matrices: Vec<Vec<f32>>,
    ) -> Result<Self> {
        let rows = labels.len();
        let checkpoints = matrices
            .into_iter()
            .enumerate()
            .map(|(k, m)| Checkpoint::from_raw(k, rows, n_classes, m))
            .collect::<Result<Vec<_>>>()?;
        if checkpoints.is_empty() {
            return Err(Error::NoCheckpoints);
        }
        Self::new(epochs, labels, clean_labels, checkpoints)
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }
}

impl CheckpointSource for MemoryLog {
    fn n_examples(&self) -> usize {
        self.labels.len()
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn epochs(&self) -> &[u64] {
        &self.epochs
    }
    fn labels(&self) -> &[u32] {
        &self.labels
    }
    fn clean_labels(&self) -> Option<&[u32]> {
        self.clean_labels.as_deref()
    }
    fn with_checkpoint<R>(&self, index: usize, f: impl FnOnce(&Checkpoint) -> R) -> Result<R> {
        self.checkpoints
            .get(index)
            .map(f)
            .ok_or(Error::CheckpointOutOfRange { index, len: self.checkpoints.len() })
    }
}
