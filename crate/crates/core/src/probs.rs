use alloc::vec;
use alloc::vec::Vec;

use crate::checkpoint::{argmax, CheckpointSource};
use crate::error::{Error, Result};
use crate::subset::SubsetMask;

/// Double-precision probability rows, one per member of a subset, in subset
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseProbs {
    classes: usize,
    data: Vec<f64>,
}

impl DenseProbs {
    pub fn zeros(rows: usize, classes: usize) -> Self {
        DenseProbs { classes, data: vec![0.0; rows * classes] }
    }

    pub fn from_vec(rows: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * classes {
            return Err(Error::LengthMismatch { what: "probability rows", expected: rows * classes, actual: data.len() });
        }
        Ok(DenseProbs { classes, data })
    }

    /// Renormalized rows of checkpoint `index` restricted to `subset`.
    pub fn from_checkpoint<L: CheckpointSource + ?Sized>(
        log: &L,
        index: usize,
        subset: &SubsetMask,
    ) -> Result<Self> {
        let classes = log.n_classes();
        let mut out = DenseProbs::zeros(subset.len(), classes);
        log.with_checkpoint(index, |cp| {
            for (row, i) in out.data.chunks_exact_mut(classes).zip(subset.iter()) {
                cp.row_into(i, row);
            }
        })?;
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.classes).unwrap_or(0)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.classes)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.classes..(row + 1) * self.classes]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.classes..(row + 1) * self.classes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn predict(&self, row: usize) -> u32 {
        argmax(self.row(row).iter().copied())
    }

    pub fn predictions(&self) -> Vec<u32> {
        (0..self.rows()).map(|r| self.predict(r)).collect()
    }
}
