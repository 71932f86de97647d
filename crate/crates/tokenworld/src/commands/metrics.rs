use std::path::Path;

use tokenworld_core::metrics::{motion_mask, mse, psnr, roi_metric, ssim, MaskParams, RoiKind};
use tokenworld_core::{Error, Frame};

use super::{CommandError, CommandResult};
use crate::io::{fmt_f64, read_frames_dir, write_csv};

pub const HEADER: [&str; 8] = ["frame_index", "mse", "psnr", "ssim", "roi_mse", "roi_psnr", "roi_ssim", "coverage"];

fn mean(vs: &[f64]) -> f64 {
    vs.iter().sum::<f64>() / vs.len() as f64
}

/// Compares clip `b` against reference clip `a`. The ROI is the union motion
/// mask of `a`. The last row, `frame_index = mean`, averages every column.
pub fn compare(a: &[Frame], b: &[Frame], params: &MaskParams) -> Result<(Vec<[f64; 7]>, f64), CommandError> {
    if a.len() != b.len() {
        return Err(CommandError::Usage(format!("frame counts differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(CommandError::Usage("no frames found".into()));
    }
    let masks = motion_mask(a, params)?;
    let coverage = masks.union.coverage();
    let mut rows = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        if !x.same_shape(y) {
            return Err(Error::Shape(format!("{}x{} vs {}x{}", x.width(), x.height(), y.width(), y.height())).into());
        }
        let roi = |kind| match roi_metric(x, y, &masks.union, kind) {
            Err(Error::EmptyRoi) => Ok(f64::NAN),
            other => other,
        };
        rows.push([
            mse(x, y)?,
            psnr(x, y)?,
            ssim(x, y)?.mean,
            roi(RoiKind::Mse)?,
            roi(RoiKind::Psnr)?,
            roi(RoiKind::Ssim)?,
            coverage,
        ]);
    }
    Ok((rows, coverage))
}

pub fn run(
    dir_a: &Path,
    dir_b: &Path,
    params: &MaskParams,
    roi_required: bool,
    out: &Path,
    seed: u64,
) -> Result<CommandResult, CommandError> {
    let a = read_frames_dir(dir_a)?;
    let b = read_frames_dir(dir_b)?;
    let (rows, coverage) = compare(&a, &b, params)?;
    if roi_required && coverage == 0.0 {
        return Ok(CommandResult::new(false, vec![], "empty ROI".into()));
    }
    let mut table: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| std::iter::once((i + 1).to_string()).chain(r.iter().map(|&v| fmt_f64(v))).collect())
        .collect();
    let means: Vec<String> = (0..7).map(|j| fmt_f64(mean(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))).collect();
    table.push(std::iter::once("mean".to_string()).chain(means).collect());
    let path = out.join("metrics.csv");
    write_csv(&path, seed, &HEADER, &table)?;
    let psnr_mean = mean(&rows.iter().map(|r| r[1]).collect::<Vec<_>>());
    let ssim_mean = mean(&rows.iter().map(|r| r[2]).collect::<Vec<_>>());
    let summary = format!("{} frames; mean psnr {psnr_mean:.3}, mean ssim {ssim_mean:.4}, ROI coverage {coverage:.4}", rows.len());
    Ok(CommandResult::new(true, vec![path], summary))
}
