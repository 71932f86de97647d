//! Pixel metrics and motion-masked ROI variants.

mod motion;
mod ssim;

pub use motion::{frame_diff, motion_mask, MaskParams, MotionMasks};
pub use ssim::{ssim, ssim_with, SsimMap, SsimParams};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Mean squared difference over all pixels and channels.
pub fn mse(x: &Frame, y: &Frame) -> Result<f64> {
    x.check_same_shape(y)?;
    let n = x.data().len() as f64;
    Ok(x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// `10·log10(1/mse)`; `+∞` for identical frames.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        -10.0 * libm::log10(mse)
    }
}

pub fn psnr(x: &Frame, y: &Frame) -> Result<f64> {
    mse(x, y).map(psnr_from_mse)
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, found: bits.len() });
        }
        Ok(Mask { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask { width, height, bits: alloc::vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask { width, height, bits: alloc::vec![true; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Mask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Fraction of set pixels.
    pub fn coverage(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &Mask) -> Mask {
        Mask {
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
            ..*self
        }
    }

    fn check_frame(&self, f: &Frame) -> Result<()> {
        if f.width() != self.width || f.height() != self.height {
            return Err(Error::Shape(alloc::format!(
                "mask {}x{} vs frame {}x{}",
                self.width,
                self.height,
                f.width(),
                f.height()
            )));
        }
        Ok(())
    }
}

pub fn roi_coverage(mask: &Mask) -> f64 {
    mask.coverage()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoiKind {
    Mse,
    Psnr,
    Ssim,
}

/// Metric restricted to `mask`. SSIM averages the local map over masked
/// pixels that carry a full window.
pub fn roi_metric(x: &Frame, y: &Frame, mask: &Mask, kind: RoiKind) -> Result<f64> {
    roi_metric_with(x, y, mask, kind, &SsimParams::default())
}

pub fn roi_metric_with(x: &Frame, y: &Frame, mask: &Mask, kind: RoiKind, params: &SsimParams) -> Result<f64> {
    x.check_same_shape(y)?;
    mask.check_frame(x)?;
    match kind {
        RoiKind::Mse => roi_mse(x, y, mask),
        RoiKind::Psnr => roi_mse(x, y, mask).map(psnr_from_mse),
        RoiKind::Ssim => ssim_with(x, y, params)?.masked_mean(mask),
    }
}

fn roi_mse(x: &Frame, y: &Frame, mask: &Mask) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let ch = x.channels();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, &on) in mask.bits.iter().enumerate() {
        if on {
            for c in 0..ch {
                let d = x.data()[p * ch + c] - y.data()[p * ch + c];
                sum += d * d;
            }
            n += ch;
        }
    }
    Ok(sum / n as f64)
}
