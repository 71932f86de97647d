use std::fs;
use std::path::{Path, PathBuf};

use tokenworld_core::Frame;

use super::{io_err, malformed, FormatError};

/// Writes `P5` for one channel and `P6` for three, maxval 255.
pub fn write_pnm(path: &Path, frame: &Frame) -> Result<(), FormatError> {
    let magic = match frame.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(malformed(path, format!("cannot store {c} channels"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, out).map_err(io_err(path))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()?.parse().ok()
    }
}

/// Reads binary `P5`/`P6` with maxval ≤ 255. ASCII variants are rejected.
pub fn read_pnm(path: &Path) -> Result<Frame, FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(malformed(path, "missing PNM magic"));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => {
            return Err(FormatError::Unsupported { path: path.to_path_buf(), magic: format!("P{}", other as char) })
        }
    };
    let mut cur = Cursor { bytes: &bytes, pos: 2 };
    let (w, h, maxval) = match (cur.number(), cur.number(), cur.number()) {
        (Some(w), Some(h), Some(m)) => (w, h, m),
        _ => return Err(malformed(path, "malformed header")),
    };
    if w == 0 || h == 0 {
        return Err(malformed(path, "zero-sized image"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(malformed(path, format!("maxval {maxval} not in 1..=255")));
    }
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(malformed(path, "malformed header"));
    }
    let data = &bytes[cur.pos + 1..];
    let n = w * h * channels;
    if data.len() < n {
        return Err(malformed(path, format!("expected {n} samples, found {}", data.len())));
    }
    let scale = maxval as f64;
    let px = data[..n].iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
    Frame::new(w, h, channels, px).map_err(|source| FormatError::Core { path: path.to_path_buf(), source })
}

/// Writes `frame_0001.pgm`, `frame_0002.pgm`, … and returns the paths.
pub fn write_frames(dir: &Path, frames: &[Frame]) -> Result<Vec<PathBuf>, FormatError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let ext = if f.channels() == 3 { "ppm" } else { "pgm" };
            let p = dir.join(format!("frame_{:04}.{ext}", i + 1));
            write_pnm(&p, f).map(|_| p)
        })
        .collect()
}

fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().rev().take_while(char::is_ascii_digit).collect();
    digits.chars().rev().collect::<String>().parse().ok()
}

/// Reads every numbered `.pgm`/`.ppm` file in `dir`, ordered by its trailing number.
pub fn read_frames_dir(dir: &Path) -> Result<Vec<Frame>, FormatError> {
    let mut numbered = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("pgm" | "ppm")) {
            continue;
        }
        let n = frame_number(&path).ok_or_else(|| malformed(&path, "frame file name has no trailing number"))?;
        numbered.push((n, path));
    }
    numbered.sort();
    if let Some(w) = numbered.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(malformed(&w[1].1, format!("duplicate frame number {}", w[1].0)));
    }
    numbered.iter().map(|(_, p)| read_pnm(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quantizes_to_255_levels() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame::from_fn(7, 5, |r, c| (r * 7 + c) as f64 / 34.0).unwrap();
        let p = dir.path().join("a.pgm");
        write_pnm(&p, &f).unwrap();
        let g = read_pnm(&p).unwrap();
        assert_eq!((g.width(), g.height(), g.channels()), (7, 5, 1));
        for (a, b) in f.data().iter().zip(g.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        write_pnm(&p, &g).unwrap();
        assert_eq!(read_pnm(&p).unwrap(), g);
    }

    #[test]
    fn header_comments_and_color() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ppm");
        let mut bytes = b"P6\n# made by hand\n2 1\n# depth\n255\n".to_vec();
        bytes.extend([255, 0, 0, 0, 0, 255]);
        fs::write(&p, bytes).unwrap();
        let f = read_pnm(&p).unwrap();
        assert_eq!(f.channels(), 3);
        assert_eq!(f.data(), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn ascii_variant_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        fs::write(&p, "P2\n2 2\n255\n0 1 2 3\n").unwrap();
        let err = read_pnm(&p).unwrap_err();
        assert!(err.to_string().contains("unsupported PGM variant"), "{err}");
    }

    #[test]
    fn truncated_and_bad_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.pgm");
        fs::write(&p, b"P5\n4 4\n255\n\x00\x01").unwrap();
        assert!(matches!(read_pnm(&p), Err(FormatError::Malformed { .. })));
        fs::write(&p, b"P5\n4\n").unwrap();
        assert!(matches!(read_pnm(&p), Err(FormatError::Malformed { .. })));
        fs::write(&p, b"P5 1 1 65535\n\x00\x00").unwrap();
        assert!(matches!(read_pnm(&p), Err(FormatError::Malformed { .. })));
    }

    #[test]
    fn directory_order_is_numeric() {
        let dir = tempfile::tempdir().unwrap();
        for (name, v) in [("f10.pgm", 0.0), ("f2.pgm", 1.0), ("f1.pgm", 0.0)] {
            write_pnm(&dir.path().join(name), &Frame::filled(2, 2, 1, v).unwrap()).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "skip").unwrap();
        let frames = read_frames_dir(dir.path()).unwrap();
        assert_eq!(frames.iter().map(|f| f.data()[0]).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
    }
}
