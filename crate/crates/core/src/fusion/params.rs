use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng;

/// Shape of a fusion network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Number of features (tokens).
    pub m: usize,
    /// Token width.
    pub d: usize,
    /// Attention projection width.
    pub dk: usize,
    /// Head outputs: 1 for binary and regression, class count otherwise.
    pub outputs: usize,
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 || self.dk == 0 || self.outputs == 0 {
            return Err(Error::InvalidConfig("fusion dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Names of the parameter blocks, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    ValueWeight,
    ValueBias,
    Position,
    Gate,
    Query,
    Key,
    Value,
    Output,
    HeadWeight,
    HeadBias,
}

pub const BLOCKS: [Block; 10] = [
    Block::ValueWeight,
    Block::ValueBias,
    Block::Position,
    Block::Gate,
    Block::Query,
    Block::Key,
    Block::Value,
    Block::Output,
    Block::HeadWeight,
    Block::HeadBias,
];

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::ValueWeight => "value_weight",
            Block::ValueBias => "value_bias",
            Block::Position => "position",
            Block::Gate => "gate",
            Block::Query => "query",
            Block::Key => "key",
            Block::Value => "value",
            Block::Output => "output",
            Block::HeadWeight => "head_weight",
            Block::HeadBias => "head_bias",
        }
    }

    /// `(rows, cols)` of the block; row-major storage.
    pub fn shape(self, dims: &Dims) -> (usize, usize) {
        let Dims { m, d, dk, outputs } = *dims;
        match self {
            Block::ValueWeight | Block::ValueBias | Block::Position => (m, d),
            Block::Gate => (1, 2),
            Block::Query | Block::Key | Block::Value => (d, dk),
            Block::Output => (dk, d),
            Block::HeadWeight => (d, outputs),
            Block::HeadBias => (1, outputs),
        }
    }
}

/// All trainable values of the fusion stack as one flat vector, with a
/// gradient buffer of the same layout.
///
/// The gate block holds `[weight, bias]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    dims: Dims,
    offsets: [usize; 11],
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

impl FusionParams {
    pub fn zeros(dims: Dims) -> Result<Self> {
        dims.validate()?;
        let mut offsets = [0; 11];
        for (i, b) in BLOCKS.iter().enumerate() {
            let (r, c) = b.shape(&dims);
            offsets[i + 1] = offsets[i] + r * c;
        }
        let n = offsets[10];
        Ok(Self { dims, offsets, values: vec![0.0; n], grads: vec![0.0; n] })
    }

    /// Every value drawn from `U(-scale, scale)`.
    pub fn init_uniform(dims: Dims, scale: f64, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        let mut r = rng::seeded(seed);
        for v in p.values.iter_mut() {
            *v = rng::uniform(&mut r, -scale, scale);
        }
        Ok(p)
    }

    /// Rebuilds parameters from a flat value vector.
    pub fn from_values(dims: Dims, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        if values.len() != p.values.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "expected {} parameter values, got {}",
                p.values.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: i });
        }
        p.values = values;
        Ok(p)
    }

    #[inline]
    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self, b: Block) -> core::ops::Range<usize> {
        let i = BLOCKS.iter().position(|&x| x == b).unwrap();
        self.offsets[i]..self.offsets[i + 1]
    }

    #[inline]
    pub fn block(&self, b: Block) -> &[f64] {
        &self.values[self.range(b)]
    }

    #[inline]
    pub fn block_mut(&mut self, b: Block) -> &mut [f64] {
        let r = self.range(b);
        &mut self.values[r]
    }

    #[inline]
    pub fn grad(&self, b: Block) -> &[f64] {
        &self.grads[self.range(b)]
    }

    #[inline]
    pub fn grad_mut(&mut self, b: Block) -> &mut [f64] {
        let r = self.range(b);
        &mut self.grads[r]
    }

    pub fn gate_weight(&self) -> f64 {
        self.block(Block::Gate)[0]
    }

    pub fn gate_bias(&self) -> f64 {
        self.block(Block::Gate)[1]
    }

    pub fn set_gate(&mut self, weight: f64, bias: f64) {
        self.block_mut(Block::Gate).copy_from_slice(&[weight, bias]);
    }

    pub fn zero_grads(&mut self) {
        self.grads.fill(0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `values -= lr * grads`.
    pub fn step(&mut self, lr: f64) {
        for (v, g) in self.values.iter_mut().zip(&self.grads) {
            *v -= lr * g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous() {
        let dims = Dims { m: 3, d: 4, dk: 2, outputs: 5 };
        let p = FusionParams::zeros(dims).unwrap();
        let mut end = 0;
        for b in BLOCKS {
            let r = p.range(b);
            assert_eq!(r.start, end);
            let (rows, cols) = b.shape(&dims);
            assert_eq!(r.len(), rows * cols);
            end = r.end;
        }
        assert_eq!(end, p.len());
        assert_eq!(p.len(), 3 * 12 + 2 + 3 * 8 + 8 + 20 + 5);
    }

    #[test]
    fn uniform_init_is_seeded_and_bounded() {
        let dims = Dims { m: 4, d: 3, dk: 3, outputs: 1 };
        let a = FusionParams::init_uniform(dims, 0.1, 9).unwrap();
        assert_eq!(a, FusionParams::init_uniform(dims, 0.1, 9).unwrap());
        assert!(a.values.iter().all(|v| v.abs() <= 0.1));
        assert_ne!(a, FusionParams::init_uniform(dims, 0.1, 10).unwrap());
    }

    #[test]
    fn rejects_wrong_length() {
        let dims = Dims { m: 2, d: 2, dk: 2, outputs: 1 };
        assert!(FusionParams::from_values(dims, vec![0.0; 3]).is_err());
        assert!(FusionParams::zeros(Dims { d: 0, ..dims }).is_err());
    }
}
