use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A feature order: `sequence()[p]` is the feature placed at position `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    sequence: Vec<usize>,
    positions: Vec<usize>,
}

impl Permutation {
    /// Validates that `sequence` is a bijection on `0..sequence.len()`.
    pub fn new(sequence: Vec<usize>) -> Result<Self> {
        let m = sequence.len();
        let mut positions = vec![usize::MAX; m];
        for (p, &f) in sequence.iter().enumerate() {
            if f >= m || positions[f] != usize::MAX {
                return Err(Error::NotAPermutation(m));
            }
            positions[f] = p;
        }
        Ok(Self { sequence, positions })
    }

    pub fn identity(m: usize) -> Self {
        let sequence: Vec<usize> = (0..m).collect();
        Self { positions: sequence.clone(), sequence }
    }

    /// Builds the order from a position map (`positions[f]` = position of `f`).
    pub fn from_positions(positions: Vec<usize>) -> Result<Self> {
        let inv = Self::new(positions)?;
        Ok(inv.inverse())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    #[inline]
    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    #[inline]
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    #[inline]
    pub fn position(&self, feature: usize) -> usize {
        self.positions[feature]
    }

    pub fn inverse(&self) -> Self {
        Self { sequence: self.positions.clone(), positions: self.sequence.clone() }
    }

    pub fn reversed(&self) -> Self {
        let mut seq = self.sequence.clone();
        seq.reverse();
        Self::new(seq).expect("reversal of a permutation")
    }

    /// Swaps the features at positions `a` and `b`.
    pub fn swap_positions(&mut self, a: usize, b: usize) {
        self.sequence.swap(a, b);
        self.positions[self.sequence[a]] = a;
        self.positions[self.sequence[b]] = b;
    }

    pub fn into_sequence(self) -> Vec<usize> {
        self.sequence
    }
}
