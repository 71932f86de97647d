use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, CommandError, CommandResult};
use crate::config::{load_config, PredictorKind, RunConfig, TokenizerPreset};

#[derive(Debug, Parser)]
#[command(name = "tokenworld", version, about = "Token world-model experiments at desk scale")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; every field is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exhaustive FSQ index round-trip audit.
    FsqSelftest {
        /// Comma-separated levels.
        #[arg(long, default_value = "7,5,5,5,5")]
        levels: String,
    },
    /// AR and SWR rollouts side by side on the synthetic world.
    Rollout {
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        corruption: Option<f64>,
        #[arg(long, value_parser = parse_predictor)]
        predictor: Option<PredictorKind>,
        #[arg(long, value_parser = parse_tokenizer)]
        tokenizer: Option<TokenizerPreset>,
    },
    /// Empirical SWR drift envelope against its bound for a list of windows.
    DriftSweep {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta_q: Option<f64>,
        /// Comma-separated windows.
        #[arg(long)]
        window_list: Option<String>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// GRPO on a tabular toy policy after a finite-difference preflight.
    GrpoTrain {
        #[arg(long)]
        group_size: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        clip: Option<f64>,
    },
    /// Per-frame and ROI metrics of clip B against reference clip A.
    Metrics {
        dir_a: PathBuf,
        dir_b: PathBuf,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        kernel: Option<usize>,
        /// Fail when the motion mask is empty.
        #[arg(long)]
        roi_required: bool,
    },
}

fn parse_predictor(s: &str) -> Result<PredictorKind, String> {
    match s {
        "oracle" => Ok(PredictorKind::Oracle),
        "history" => Ok(PredictorKind::History),
        _ => Err(format!("expected oracle or history, got {s:?}")),
    }
}

fn parse_tokenizer(s: &str) -> Result<TokenizerPreset, String> {
    match s {
        "desk" => Ok(TokenizerPreset::Desk),
        "reference" => Ok(TokenizerPreset::Reference),
        _ => Err(format!("expected desk or reference, got {s:?}")),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_list(text: &str) -> Result<Vec<usize>, CommandError> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| CommandError::Usage(format!("bad window {s:?} in {text:?}"))))
        .collect()
}

/// Loads the config and applies flag overrides, then re-validates.
fn resolve(common: &Common, command: &Command) -> Result<RunConfig, CommandError> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.output_dir, common.out.clone());
    set(&mut cfg.seed, common.seed);
    match command {
        Command::FsqSelftest { .. } => {}
        Command::Rollout { window, horizon, corruption, predictor, tokenizer } => {
            set(&mut cfg.decode.window, *window);
            set(&mut cfg.decode.horizon, *horizon);
            set(&mut cfg.world.corruption, *corruption);
            set(&mut cfg.world.predictor, *predictor);
            set(&mut cfg.world.tokenizer, *tokenizer);
        }
        Command::DriftSweep { alpha, eps, delta_q, window_list, horizon, trials } => {
            set(&mut cfg.drift.alpha, *alpha);
            set(&mut cfg.drift.eps, *eps);
            set(&mut cfg.drift.delta_q, *delta_q);
            set(&mut cfg.drift.windows, window_list.as_deref().map(parse_list).transpose()?);
            set(&mut cfg.drift.horizon, *horizon);
            set(&mut cfg.drift.trials, *trials);
        }
        Command::GrpoTrain { group_size, iters, lr, beta, clip } => {
            set(&mut cfg.train.group_size, *group_size);
            set(&mut cfg.train.iterations, *iters);
            set(&mut cfg.train.lr, *lr);
            set(&mut cfg.reward.beta, *beta);
            set(&mut cfg.reward.clip_eps, *clip);
        }
        Command::Metrics { tau, theta, kernel, .. } => {
            set(&mut cfg.metrics.tau, *tau);
            set(&mut cfg.metrics.theta, *theta);
            set(&mut cfg.metrics.kernel, *kernel);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<CommandResult, CommandError> {
    let cfg = resolve(&cli.common, &cli.command)?;
    let out = cfg.output_dir.clone();
    let echo = cfg.write_echo(&out)?;
    let mut result = match &cli.command {
        Command::FsqSelftest { levels } => {
            commands::fsq_selftest::run(&commands::fsq_selftest::parse_levels(levels)?, &out, cfg.seed)
        }
        Command::Rollout { .. } => commands::rollout::run(&cfg, &out),
        Command::DriftSweep { .. } => commands::drift_sweep::run(&cfg.drift, &out, cfg.seed),
        Command::GrpoTrain { .. } => commands::grpo_train::run(&cfg, &out),
        Command::Metrics { dir_a, dir_b, roi_required, .. } => {
            commands::metrics::run(dir_a, dir_b, &cfg.metrics.params(), *roi_required, &out, cfg.seed)
        }
    }?;
    result.artifacts.push(echo);
    Ok(result)
}
