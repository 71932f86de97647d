use alloc::vec;
use alloc::vec::Vec;

use super::Mask;
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    /// Temporal neighborhood radius.
    pub tau: usize,
    /// Threshold on the 0–255 intensity scale.
    pub theta: f64,
    /// Disc diameter for closing and dilation.
    pub kernel: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        MaskParams { tau: 3, theta: 15.0, kernel: 15 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionMasks {
    pub per_frame: Vec<Mask>,
    pub union: Mask,
    pub params: MaskParams,
}

/// `D_t`: mean over `0 < |t′ − t| ≤ τ` of the per-pixel channel-mean absolute
/// difference. `t` is 1-based.
pub fn frame_diff(clip: &[Frame], t: usize, tau: usize) -> Result<Vec<f64>> {
    if t == 0 || t > clip.len() {
        return Err(Error::IndexOutOfRange { index: t as u64, size: clip.len() as u64 });
    }
    if tau == 0 {
        return Err(Error::param("tau", "must be at least 1"));
    }
    let x = &clip[t - 1];
    let lo = t.saturating_sub(tau).max(1);
    let hi = (t + tau).min(clip.len());
    let neighbors: Vec<usize> = (lo..=hi).filter(|&s| s != t).collect();
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let ch = x.channels();
    let mut d = vec![0.0; x.pixel_count()];
    for &s in &neighbors {
        let y = &clip[s - 1];
        x.check_same_shape(y)?;
        for (p, out) in d.iter_mut().enumerate() {
            let mut acc = 0.0;
            for c in 0..ch {
                acc += (x.data()[p * ch + c] - y.data()[p * ch + c]).abs();
            }
            *out += acc / ch as f64;
        }
    }
    let n = neighbors.len() as f64;
    d.iter_mut().for_each(|v| *v /= n);
    Ok(d)
}

/// Offsets `(di, dj)` with `(di/(k/2))² + (dj/(k/2))² ≤ 1`.
fn disc(k: usize) -> Vec<(isize, isize)> {
    if k <= 1 {
        return vec![(0, 0)];
    }
    let r = k as f64 / 2.0;
    let reach = (k / 2) as isize;
    let mut out = Vec::new();
    for di in -reach..=reach {
        for dj in -reach..=reach {
            let (a, b) = (di as f64 / r, dj as f64 / r);
            if a * a + b * b <= 1.0 {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Dilation (`any`) or erosion (`all`). Out-of-image pixels are neutral: they
/// never set a pixel under dilation and never clear one under erosion, so
/// closing stays extensive at the border.
fn morph(mask: &Mask, se: &[(isize, isize)], dilate: bool) -> Mask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    Mask::from_fn(mask.width(), mask.height(), |r, c| {
        let probe = |&(di, dj): &(isize, isize)| {
            let (rr, cc) = (r as isize + di, c as isize + dj);
            if rr < 0 || cc < 0 || rr >= h || cc >= w {
                return !dilate;
            }
            mask.get(rr as usize, cc as usize)
        };
        if dilate {
            se.iter().any(probe)
        } else {
            se.iter().all(probe)
        }
    })
}

/// Thresholded differences, closed then dilated by a disc of diameter `k`.
pub fn motion_mask(clip: &[Frame], p: &MaskParams) -> Result<MotionMasks> {
    if clip.len() < 2 {
        return Err(Error::EmptyNeighborhood);
    }
    let (w, h) = (clip[0].width(), clip[0].height());
    let se = disc(p.kernel);
    let mut per_frame = Vec::with_capacity(clip.len());
    let mut union = Mask::empty(w, h);
    for t in 1..=clip.len() {
        let d = frame_diff(clip, t, p.tau)?;
        let raw = Mask::new(w, h, d.iter().map(|v| v * 255.0 > p.theta).collect())?;
        let closed = morph(&morph(&raw, &se, true), &se, false);
        let m = morph(&closed, &se, true);
        union = union.union(&m);
        per_frame.push(m);
    }
    Ok(MotionMasks { per_frame, union, params: *p })
}
