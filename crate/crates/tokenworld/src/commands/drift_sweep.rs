use std::path::Path;

use tokenworld_core::drift::{sweep_window, DriftParams};
use tokenworld_core::Error;

use super::{CommandError, CommandResult};
use crate::config::DriftConfig;
use crate::io::{fmt_f64, write_csv};

pub fn run(cfg: &DriftConfig, out: &Path, seed: u64) -> Result<CommandResult, CommandError> {
    let p = DriftParams::new(cfg.eps, cfg.delta_q, cfg.alpha, cfg.windows[0], cfg.horizon)
        .map_err(|e| CommandError::Usage(e.to_string()))?;
    let rows = sweep_window(&p, &cfg.windows, cfg.horizon, cfg.trials, seed).map_err(|e| match e {
        Error::UndefinedBound => CommandError::Usage("SWR bound undefined for alpha = 1".into()),
        other => other.into(),
    })?;
    let path = out.join("drift_sweep.csv");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.window.to_string(), fmt_f64(r.bound), fmt_f64(r.empirical_max), fmt_f64(r.eta_star)])
        .collect();
    write_csv(&path, seed, &["W", "bound", "empirical_max", "eta_star"], &table)?;
    let violations: Vec<usize> = rows.iter().filter(|r| !r.within_bound()).map(|r| r.window).collect();
    let best = rows
        .iter()
        .min_by(|a, b| a.bound.total_cmp(&b.bound))
        .map(|r| r.window)
        .expect("at least one window");
    let summary = if violations.is_empty() {
        format!("{} windows within bound; tightest bound at W={best}", rows.len())
    } else {
        format!("bound exceeded for W in {violations:?}")
    };
    Ok(CommandResult::new(violations.is_empty(), vec![path], summary))
}
