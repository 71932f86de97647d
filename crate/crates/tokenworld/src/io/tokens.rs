use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tokenworld_core::sequence::{ClipSpec, TokenSequence, VocabLayout};

use super::{io_err, malformed, FormatError};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    length: usize,
    codebook_size: u32,
    action_bins: u32,
    vocab_size: u32,
    frames: usize,
    context_frames: usize,
    context_tokens: usize,
    dynamics_tokens: usize,
    action_dims: usize,
}

pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Little-endian `u32` ids in `path`, spec and layout in the `.json` sidecar.
pub fn write_sequence(path: &Path, seq: &TokenSequence) -> Result<PathBuf, FormatError> {
    let bytes: Vec<u8> = seq.ids().iter().flat_map(|id| id.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(io_err(path))?;
    let (s, l) = (seq.spec(), seq.layout());
    let car = Sidecar {
        length: seq.len(),
        codebook_size: l.codebook_size(),
        action_bins: l.action_bins(),
        vocab_size: l.vocab_size(),
        frames: s.frames,
        context_frames: s.context_frames,
        context_tokens: s.context_tokens,
        dynamics_tokens: s.dynamics_tokens,
        action_dims: s.action_dims,
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&car).expect("sidecar serializes");
    fs::write(&side, text + "\n").map_err(io_err(&side))?;
    Ok(side)
}

pub fn read_sequence(path: &Path) -> Result<TokenSequence, FormatError> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    let car: Sidecar = serde_json::from_str(&text).map_err(|e| malformed(&side, e.to_string()))?;
    let core = |source| FormatError::Core { path: path.to_path_buf(), source };
    let layout = VocabLayout::new(car.codebook_size, car.action_bins).map_err(core)?;
    if layout.vocab_size() != car.vocab_size {
        return Err(malformed(&side, format!("vocab_size {} disagrees with layout {}", car.vocab_size, layout.vocab_size())));
    }
    let spec = ClipSpec::new(car.frames, car.context_frames, car.context_tokens, car.dynamics_tokens, car.action_dims)
        .map_err(core)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 4 != 0 || bytes.len() / 4 != car.length {
        return Err(malformed(path, format!("{} bytes for {} ids", bytes.len(), car.length)));
    }
    let ids = bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    TokenSequence::from_ids(ids, &layout, &spec).map_err(core)
}
