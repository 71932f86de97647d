use std::fs;
use std::path::Path;

use serde::Serialize;
use tokenworld_core::policy::{finite_difference_check, random_fd_instance, train, TabularPolicy, TargetCount};
use tokenworld_core::seed::derive_stream;

use super::{CommandError, CommandResult};
use crate::config::RunConfig;
use crate::io::{fmt_f64, write_csv};

pub const FD_INSTANCES: usize = 10;
pub const FD_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;

#[derive(Serialize)]
struct PolicyDump<'a> {
    vocab: usize,
    target: u32,
    expected_target_count: f64,
    start_logits: &'a [f64],
    trans_logits: &'a [f64],
}

/// Worst relative error of the analytic gradient over seeded random instances.
pub fn preflight(cfg: &RunConfig) -> Result<f64, CommandError> {
    let mut rng = derive_stream(cfg.seed, "fd-preflight");
    let reward = cfg.reward.to_core();
    let t = &cfg.train;
    let mut worst: f64 = 0.0;
    for _ in 0..FD_INSTANCES {
        let (policy, reference, group) =
            random_fd_instance(t.vocab, t.seq_len.min(6), t.group_size.min(8), &reward, &mut rng)?;
        worst = worst.max(finite_difference_check(&policy, &reference, &group, &reward, FD_STEP)?.max_rel_error);
    }
    Ok(worst)
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<CommandResult, CommandError> {
    let fd = preflight(cfg)?;
    if fd > FD_TOLERANCE {
        return Ok(CommandResult::new(false, vec![], format!("gradient check failed: relative error {fd:e}")));
    }
    let t = &cfg.train;
    let init = TabularPolicy::random(t.vocab, t.init_scale, &mut derive_stream(cfg.seed, "init"))?;
    let mut policy = init.clone();
    let history = train(&mut policy, &init, &mut TargetCount(t.target), &cfg.train_config(), cfg.seed)?;

    let hist_path = out.join("grpo_history.csv");
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|r| vec![r.iteration.to_string(), fmt_f64(r.mean_reward), fmt_f64(r.kl), fmt_f64(r.grad_norm)])
        .collect();
    write_csv(&hist_path, cfg.seed, &["iteration", "mean_reward", "kl", "grad_norm"], &rows)?;

    let before = init.expected_count(t.target, t.seq_len);
    let after = policy.expected_count(t.target, t.seq_len);
    let dump = PolicyDump {
        vocab: policy.vocab(),
        target: t.target,
        expected_target_count: after,
        start_logits: policy.start_logits(),
        trans_logits: policy.trans_logits(),
    };
    let policy_path = out.join("policy.json");
    fs::write(&policy_path, serde_json::to_string_pretty(&dump).expect("policy serializes") + "\n")
        .map_err(|source| crate::io::FormatError::Io { path: policy_path.clone(), source })?;

    let q = history.len() / 4;
    let trend = if q == 0 {
        "n/a".to_string()
    } else {
        let mean = |rows: &[tokenworld_core::policy::HistoryRow]| rows.iter().map(|r| r.mean_reward).sum::<f64>() / rows.len() as f64;
        let (first, last) = (mean(&history[..q]), mean(&history[history.len() - q..]));
        format!("{} ({first:.3} -> {last:.3})", if last > first { "rising" } else { "flat or falling" })
    };
    let summary = format!(
        "fd error {fd:.1e}; {} iterations; expected target count {before:.3} -> {after:.3}; reward trend {trend}",
        history.len()
    );
    Ok(CommandResult::new(true, vec![hist_path, policy_path], summary))
}
