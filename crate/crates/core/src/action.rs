//! Equal-width binning of continuous action vectors into the action-token
//! segment of the joint vocabulary.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DEFAULT_BIN_EPSILON: f64 = 1e-6;

/// Per-dimension extrema fitted on training actions, plus bin count and the
/// denominator epsilon. Shared between training and inference.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRangeTable {
    min: Vec<f64>,
    max: Vec<f64>,
    bins: u32,
    epsilon: f64,
}

/// Action tokens of one step, already offset into `[2K, 2K + B_a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionTokenBlock(pub Vec<u32>);

impl ActionTokenBlock {
    pub fn tokens(&self) -> &[u32] {
        &self.0
    }
}

impl ActionRangeTable {
    pub fn new(min: Vec<f64>, max: Vec<f64>, bins: u32, epsilon: f64) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidBinCount(bins));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidRange(alloc::format!("epsilon {epsilon} must be positive")));
        }
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch { expected: min.len(), found: max.len() });
        }
        if min.is_empty() {
            return Err(Error::InvalidRange("at least one dimension is required".into()));
        }
        for (i, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite);
            }
            if hi < lo {
                return Err(Error::InvalidRange(alloc::format!("dimension {i}: max {hi} < min {lo}")));
            }
        }
        Ok(ActionRangeTable { min, max, bins, epsilon })
    }

    /// Componentwise extrema of `samples`.
    pub fn fit<S: AsRef<[f64]>>(samples: &[S], bins: u32, epsilon: f64) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptySamples)?.as_ref();
        let dims = first.len();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for s in samples {
            let s = s.as_ref();
            if s.len() != dims {
                return Err(Error::RaggedSamples { expected: dims, found: s.len() });
            }
            for (i, &v) in s.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite);
                }
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        ActionRangeTable::new(min, max, bins, epsilon)
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    pub fn bins(&self) -> u32 {
        self.bins
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    fn width(&self, dim: usize) -> f64 {
        self.max[dim] - self.min[dim] + self.epsilon
    }

    /// `⌊B·(a − min)/(max − min + ε)⌋`, clamped into `[0, B − 1]`.
    pub fn bin(&self, dim: usize, value: f64) -> u32 {
        let raw = libm::floor(self.bins as f64 * (value - self.min[dim]) / self.width(dim));
        raw.clamp(0.0, (self.bins - 1) as f64) as u32
    }

    pub fn bin_center(&self, dim: usize, bin: u32) -> f64 {
        self.min[dim] + (bin as f64 + 0.5) * self.width(dim) / self.bins as f64
    }

    pub fn discretize(&self, action: &[f64], vocab_offset: u32) -> Result<ActionTokenBlock> {
        if action.len() != self.dims() {
            return Err(Error::DimensionMismatch { expected: self.dims(), found: action.len() });
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ActionTokenBlock(
            action.iter().enumerate().map(|(i, &v)| self.bin(i, v) + vocab_offset).collect(),
        ))
    }

    /// Bin centers for a token block.
    pub fn dequantize(&self, block: &ActionTokenBlock, vocab_offset: u32) -> Result<Vec<f64>> {
        if block.0.len() != self.dims() {
            return Err(Error::DimensionMismatch { expected: self.dims(), found: block.0.len() });
        }
        block
            .0
            .iter()
            .enumerate()
            .map(|(i, &tok)| {
                let bin = tok
                    .checked_sub(vocab_offset)
                    .filter(|&b| b < self.bins)
                    .ok_or(Error::TokenOutOfSegment { token: tok, segment: "action" })?;
                Ok(self.bin_center(i, bin))
            })
            .collect()
    }
}
