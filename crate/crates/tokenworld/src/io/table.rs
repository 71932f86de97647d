use std::fs;
use std::path::Path;

use super::{io_err, FormatError};

/// Shortest round-trip decimal; `inf`, `-inf` and `nan` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Writes a header row then `rows`, each prefixed by a `seed` column.
pub fn write_csv(path: &Path, seed: u64, header: &[&str], rows: &[Vec<String>]) -> Result<(), FormatError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let csv_err = |source| FormatError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(std::iter::once("seed").chain(header.iter().copied())).map_err(csv_err)?;
    let seed = seed.to_string();
    for row in rows {
        w.write_record(std::iter::once(seed.as_str()).chain(row.iter().map(String::as_str))).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_seed_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/t.csv");
        write_csv(&p, 7, &["a", "b"], &[vec!["1".into(), fmt_f64(0.5)], vec!["x,y".into(), fmt_f64(f64::INFINITY)]])
            .unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "seed,a,b\n7,1,0.5\n7,\"x,y\",inf\n");
    }

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(-f64::INFINITY), "-inf");
        assert_eq!(fmt_f64(1e-20).parse::<f64>().unwrap(), 1e-20);
    }
}
