use alloc::vec;
use alloc::vec::Vec;

use super::Mask;
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    /// Odd Gaussian window size.
    pub window: usize,
    pub sigma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams { window: 11, sigma: 1.5, c1: 0.01 * 0.01, c2: 0.03 * 0.03 }
    }
}

impl SsimParams {
    fn kernel(&self) -> Vec<f64> {
        let half = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - half;
                libm::exp(-d * d / (2.0 * self.sigma * self.sigma))
            })
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

/// Local SSIM over the valid region: entry `(r, c)` is centered on pixel
/// `(r + margin, c + margin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimMap {
    pub mean: f64,
    pub map: Vec<f64>,
    pub map_width: usize,
    pub map_height: usize,
    pub margin: usize,
}

impl SsimMap {
    /// Mean of the map over masked pixels that have a map entry.
    pub fn masked_mean(&self, mask: &Mask) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in 0..self.map_height {
            for c in 0..self.map_width {
                if mask.get(r + self.margin, c + self.margin) {
                    sum += self.map[r * self.map_width + c];
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::EmptyRoi);
        }
        Ok(sum / n as f64)
    }
}

/// Valid separable filtering of a `w×h` plane.
fn filter(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut horiz = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            horiz[r * ow + c] = k.iter().enumerate().map(|(i, kv)| kv * plane[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = k.iter().enumerate().map(|(i, kv)| kv * horiz[(r + i) * ow + c]).sum();
        }
    }
    out
}

pub fn ssim(x: &Frame, y: &Frame) -> Result<SsimMap> {
    ssim_with(x, y, &SsimParams::default())
}

/// Gaussian-window SSIM; multi-channel maps are averaged over channels.
pub fn ssim_with(x: &Frame, y: &Frame, p: &SsimParams) -> Result<SsimMap> {
    x.check_same_shape(y)?;
    if p.window == 0 || p.window % 2 == 0 {
        return Err(Error::param("window", "must be odd and positive"));
    }
    let (w, h) = (x.width(), x.height());
    if w < p.window || h < p.window {
        return Err(Error::FrameTooSmall { width: w, height: h, window: p.window });
    }
    let k = p.kernel();
    let ow = w - p.window + 1;
    let oh = h - p.window + 1;
    let mut map = vec![0.0; ow * oh];
    let ch = x.channels();
    for c in 0..ch {
        let a = x.plane(c);
        let b = y.plane(c);
        let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u * v).collect();
        let mu_a = filter(&a, w, h, &k);
        let mu_b = filter(&b, w, h, &k);
        let e_aa = filter(&aa, w, h, &k);
        let e_bb = filter(&bb, w, h, &k);
        let e_ab = filter(&ab, w, h, &k);
        for i in 0..map.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let s = ((2.0 * ma * mb + p.c1) * (2.0 * cov + p.c2)) / ((ma * ma + mb * mb + p.c1) * (va + vb + p.c2));
            map[i] += s / ch as f64;
        }
    }
    let mean = map.iter().sum::<f64>() / map.len() as f64;
    Ok(SsimMap { mean, map, map_width: ow, map_height: oh, margin: p.window / 2 })
}
