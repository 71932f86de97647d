use std::fs;
use std::path::Path;

use serde::Deserialize;
use tokenworld_core::action::ActionRangeTable;

use super::{io_err, malformed, FormatError};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    dims: usize,
    #[serde(rename = "B_a")]
    bins: u32,
    epsilon: f64,
    min: Vec<f64>,
    max: Vec<f64>,
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn list(vs: &[f64]) -> String {
    vs.iter().map(|&v| sci(v)).collect::<Vec<_>>().join(", ")
}

/// JSON with 17 significant digits per float.
pub fn write_action_table(path: &Path, table: &ActionRangeTable) -> Result<(), FormatError> {
    let text = format!(
        "{{\n  \"dims\": {},\n  \"B_a\": {},\n  \"epsilon\": {},\n  \"min\": [{}],\n  \"max\": [{}]\n}}\n",
        table.dims(),
        table.bins(),
        sci(table.epsilon()),
        list(table.min()),
        list(table.max())
    );
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_action_table(path: &Path) -> Result<ActionRangeTable, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let f: TableFile = serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))?;
    if f.min.len() != f.dims || f.max.len() != f.dims {
        return Err(malformed(path, format!("dims = {} but min/max have {}/{}", f.dims, f.min.len(), f.max.len())));
    }
    ActionRangeTable::new(f.min, f.max, f.bins, f.epsilon)
        .map_err(|source| FormatError::Core { path: path.to_path_buf(), source })
}
