use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;

use crate::error::{Error, Result};

/// A sorted, duplicate-free set of example indices over `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    n: usize,
    indices: Vec<usize>,
}

impl SubsetMask {
    pub fn all(n: usize) -> Self {
        SubsetMask { n, indices: (0..n).collect() }
    }

    /// Sorts and deduplicates `indices`; fails if any is `>= n`.
    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        if let Some(&index) = indices.last().filter(|&&i| i >= n) {
            return Err(Error::SubsetIndexOutOfRange { index, n });
        }
        Ok(SubsetMask { n, indices })
    }

    /// Size of the universe the mask was built over.
    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptySubset)
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_universe(&self, n: usize) -> Result<()> {
        match self.indices.last() {
            Some(&index) if index >= n => Err(Error::SubsetIndexOutOfRange { index, n }),
            _ => Ok(()),
        }
    }

    /// 64-bit FNV-1a digest of the universe size and member indices.
    pub fn digest(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.n as u64);
        for &i in &self.indices {
            h.write_u64(i as u64);
        }
        h.finish()
    }
}
