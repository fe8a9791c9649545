use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Who owns a parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamOwner {
    Layer(usize),
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Complex filter taps stored as interleaved `(re, im)` pairs, `[out][in][tap]`.
    ConvTaps,
    ModReluBias,
    /// Global pool blend weight, constrained to `[0, 1]`.
    PoolAlpha,
    HiddenWeight,
    HiddenBias,
    OutputWeight,
    OutputBias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub owner: ParamOwner,
    pub kind: ParamKind,
    pub offset: usize,
    /// Number of real scalars.
    pub len: usize,
}

impl ParamBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Flat real parameter vector plus the table mapping layers to index ranges.
/// Blocks are contiguous, ordered and non-overlapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    values: Vec<f64>,
    blocks: Vec<ParamBlock>,
}

impl ParamStore {
    pub fn empty() -> Self {
        ParamStore {
            values: Vec::new(),
            blocks: Vec::new(),
        }
    }

    /// Appends a zero-initialized block and returns its index.
    pub fn push_block(&mut self, owner: ParamOwner, kind: ParamKind, len: usize) -> usize {
        let offset = self.values.len();
        self.values.resize(offset + len, 0.0);
        self.blocks.push(ParamBlock {
            owner,
            kind,
            offset,
            len,
        });
        self.blocks.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn block(&self, index: usize) -> &ParamBlock {
        &self.blocks[index]
    }

    pub fn slice(&self, block: usize) -> &[f64] {
        &self.values[self.blocks[block].range()]
    }

    pub fn slice_mut(&mut self, block: usize) -> &mut [f64] {
        let r = self.blocks[block].range();
        &mut self.values[r]
    }

    /// Complex view of a block of interleaved pairs.
    pub fn complex(&self, block: usize) -> Vec<Complex64> {
        unpack_complex(self.slice(block))
    }

    pub fn set_complex(&mut self, block: usize, values: &[Complex64]) {
        let dst = self.slice_mut(block);
        assert_eq!(dst.len(), 2 * values.len(), "complex block length mismatch");
        for (pair, z) in dst.chunks_exact_mut(2).zip(values) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
    }

    /// Replaces all values; the layout is unchanged.
    pub fn set_values(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.values.len(), "parameter vector length mismatch");
        self.values.copy_from_slice(values);
    }

    /// Clamps constrained parameters (the pool blend weights) into range.
    pub fn clamp_constrained(&mut self) {
        for b in &self.blocks {
            if b.kind == ParamKind::PoolAlpha {
                for v in &mut self.values[b.offset..b.offset + b.len] {
                    *v = v.clamp(0.0, 1.0);
                }
            }
        }
    }
}

/// Interleaves complex values as `(re, im)` real pairs.
pub fn pack_complex(values: &[Complex64]) -> Vec<f64> {
    values.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Inverse of [`pack_complex`]; the input length must be even.
pub fn unpack_complex(values: &[f64]) -> Vec<Complex64> {
    debug_assert!(values.len().is_multiple_of(2));
    values
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}
