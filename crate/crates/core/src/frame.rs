use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Raster image with values in `[0, 1]`, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(alloc::format!("frame dimensions {width}x{height} must be positive")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(alloc::format!("unsupported channel count {channels}")));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Shape("pixel values must lie in [0, 1]".into()));
        }
        Ok(Frame { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Frame::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Grayscale frame from a per-pixel function; values are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c).clamp(0.0, 1.0));
            }
        }
        Frame::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Single channel as a row-major plane.
    pub fn plane(&self, channel: usize) -> Vec<f64> {
        self.data.iter().skip(channel).step_by(self.channels).copied().collect()
    }

    /// Channel mean per pixel.
    pub fn luma(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.clone();
        }
        self.data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect()
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Frame) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(alloc::format!(
                "frame {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Multiplies every value by `c`, clamping into `[0, 1]`.
    pub fn scaled(&self, c: f64) -> Frame {
        Frame {
            data: self.data.iter().map(|v| (v * c).clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }
}
