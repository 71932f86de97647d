use std::path::Path;

use tokenworld_core::fsq::{CodeIndex, FsqLevels};

use super::{CommandError, CommandResult};
use crate::io::write_csv;

pub const MAX_CODEBOOK: u32 = 1_000_000;

pub fn parse_levels(text: &str) -> Result<Vec<u32>, CommandError> {
    text.split(',')
        .map(|s| s.trim().parse::<u32>().map_err(|_| CommandError::Usage(format!("bad level {s:?} in {text:?}"))))
        .collect()
}

fn round_trips(fsq: &FsqLevels, i: u32) -> bool {
    let ok = fsq.decode_index(CodeIndex(i)).ok().and_then(|c| {
        let back = fsq.encode_index(&c).ok()?;
        let z = fsq.embed(&c).ok()?;
        Some(back == CodeIndex(i) && fsq.quantize(&z).ok()? == c)
    });
    ok == Some(true)
}

/// Number of indices whose decode/encode or embed/quantize round trip fails,
/// and the first of them.
pub fn audit(fsq: &FsqLevels) -> (u32, Option<u32>) {
    let mut count = 0;
    let mut first = None;
    for i in 0..fsq.codebook_size() {
        if !round_trips(fsq, i) {
            count += 1;
            first.get_or_insert(i);
        }
    }
    (count, first)
}

pub fn run(levels: &[u32], out: &Path, seed: u64) -> Result<CommandResult, CommandError> {
    let fsq = FsqLevels::new(levels).map_err(|e| CommandError::Usage(e.to_string()))?;
    let k = fsq.codebook_size();
    if k > MAX_CODEBOOK {
        return Err(CommandError::Usage(format!("codebook size {k} exceeds {MAX_CODEBOOK}")));
    }
    let (failures, failure) = audit(&fsq);
    let names: Vec<String> = levels.iter().map(u32::to_string).collect();
    let path = out.join("fsq_selftest.csv");
    write_csv(
        &path,
        seed,
        &["levels", "codebook_size", "dims", "failures", "first_failure"],
        &[vec![
            names.join(" "),
            k.to_string(),
            levels.len().to_string(),
            failures.to_string(),
            failure.map(|i| i.to_string()).unwrap_or_default(),
        ]],
    )?;
    let summary = match failure {
        None => format!("K={k}: all {k} indices round-trip"),
        Some(i) => format!("K={k}: {failures} round trips failed, first at index {i}"),
    };
    Ok(CommandResult::new(failure.is_none(), vec![path], summary))
}
