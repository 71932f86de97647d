//! Run configuration: JSON with every field optional, unknown keys rejected.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tokenworld_core::drift::DriftParams;
use tokenworld_core::fsq::FsqLevels;
use tokenworld_core::metrics::MaskParams;
use tokenworld_core::policy::TrainConfig;
use tokenworld_core::reward::{RewardConfig, Scores};
use tokenworld_core::rollout::DecodeMode;
use tokenworld_core::sequence::{ClipSpec, VocabLayout};
use tokenworld_core::world::ToyTokenizerConfig;

pub const ECHO_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, column: usize, message: String },
    Invalid { path: String, message: String },
    Io(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, column, message } => {
                write!(f, "config syntax error at line {line}, column {column}: {message}")
            }
            ConfigError::Invalid { path, message } => write!(f, "invalid config at {path}: {message}"),
            ConfigError::Io(m) => write!(f, "config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(path: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipConfig {
    pub frames: usize,
    pub context_frames: usize,
    pub context_tokens: usize,
    pub dynamics_tokens: usize,
    pub action_dims: usize,
}

impl Default for ClipConfig {
    fn default() -> Self {
        ClipConfig { frames: 8, context_frames: 1, context_tokens: 1280, dynamics_tokens: 80, action_dims: 13 }
    }
}

impl ClipConfig {
    pub fn spec(&self) -> ClipSpec {
        ClipSpec {
            frames: self.frames,
            context_frames: self.context_frames,
            context_tokens: self.context_tokens,
            dynamics_tokens: self.dynamics_tokens,
            action_dims: self.action_dims,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub levels: Vec<u32>,
    pub action_bins: u32,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig { levels: vec![7, 5, 5, 5, 5], action_bins: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Ar,
    Swr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub mode: ModeName,
    #[serde(rename = "W")]
    pub window: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { mode: ModeName::Swr, window: 6, horizon: 30 }
    }
}

impl DecodeConfig {
    pub fn mode(&self) -> DecodeMode {
        match self.mode {
            ModeName::Ar => DecodeMode::Ar,
            ModeName::Swr => DecodeMode::Swr { window: self.window },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub eps: f64,
    pub delta_q: f64,
    pub alpha: f64,
    pub windows: Vec<usize>,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub trials: usize,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig { eps: 0.01, delta_q: 0.05, alpha: 0.9, windows: vec![1, 2, 4, 6, 8, 16], horizon: 1000, trials: 100 }
    }
}

impl DriftConfig {
    /// Parameters with the first listed window.
    pub fn params(&self) -> Result<DriftParams, ConfigError> {
        let w = *self.windows.first().ok_or_else(|| invalid("drift.windows", "needs at least one window"))?;
        DriftParams::new(self.eps, self.delta_q, self.alpha, w, self.horizon).map_err(|e| invalid("drift", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub weights: Scores,
    pub lambdas: Scores,
    pub huber_delta: f64,
    pub clip_eps: f64,
    pub beta: f64,
    pub std_guard: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        let d = RewardConfig::default();
        RewardSection {
            weights: d.weights,
            lambdas: d.lambdas,
            huber_delta: d.huber_delta,
            clip_eps: d.clip_eps,
            beta: d.beta,
            std_guard: d.std_guard,
        }
    }
}

impl RewardSection {
    pub fn to_core(&self) -> RewardConfig {
        RewardConfig {
            weights: self.weights,
            lambdas: self.lambdas,
            huber_delta: self.huber_delta,
            clip_eps: self.clip_eps,
            beta: self.beta,
            std_guard: self.std_guard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: usize,
    pub group_size: usize,
    pub seq_len: usize,
    pub lr: f64,
    pub inner_steps: usize,
    pub vocab: usize,
    pub target: u32,
    pub init_scale: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            iterations: d.iterations,
            group_size: d.group_size,
            seq_len: d.seq_len,
            lr: d.lr,
            inner_steps: d.inner_steps,
            vocab: 5,
            target: 0,
            init_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerPreset {
    /// 32×32 frames, 64 context / 16 dynamics tokens.
    Desk,
    /// 320×256 frames, 1280 context / 80 dynamics tokens.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Oracle,
    History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub tokenizer: TokenizerPreset,
    pub extent: usize,
    pub cell: usize,
    pub background: f64,
    /// Top-left `[row, col]` of the object; centered when absent.
    pub start: Option<[usize; 2]>,
    pub corruption: f64,
    pub predictor: PredictorKind,
    pub persistence: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            tokenizer: TokenizerPreset::Desk,
            extent: 4,
            cell: 1,
            background: 0.0,
            start: None,
            corruption: 0.02,
            predictor: PredictorKind::History,
            persistence: 0.1,
        }
    }
}

impl WorldConfig {
    pub fn tokenizer_config(&self) -> ToyTokenizerConfig {
        match self.tokenizer {
            TokenizerPreset::Desk => ToyTokenizerConfig::desk(),
            TokenizerPreset::Reference => ToyTokenizerConfig::reference_size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub tau: usize,
    pub theta: f64,
    pub kernel: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let d = MaskParams::default();
        MetricsConfig { tau: d.tau, theta: d.theta, kernel: d.kernel }
    }
}

impl MetricsConfig {
    pub fn params(&self) -> MaskParams {
        MaskParams { tau: self.tau, theta: self.theta, kernel: self.kernel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub clip: ClipConfig,
    pub vocab: VocabConfig,
    pub decode: DecodeConfig,
    pub drift: DriftConfig,
    pub reward: RewardSection,
    pub train: TrainSection,
    pub world: WorldConfig,
    pub metrics: MetricsConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            clip: ClipConfig::default(),
            vocab: VocabConfig::default(),
            decode: DecodeConfig::default(),
            drift: DriftConfig::default(),
            reward: RewardSection::default(),
            train: TrainSection::default(),
            world: WorldConfig::default(),
            metrics: MetricsConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn check(ok: bool, path: &str, message: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(path, message))
    }
}

fn unit(path: &str, v: f64) -> Result<(), ConfigError> {
    check((0.0..=1.0).contains(&v), path, "must lie in [0, 1]")
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.clip.spec().validate().map_err(|e| invalid("clip", e))?;
        FsqLevels::new(&self.vocab.levels).map_err(|e| invalid("vocab.levels", e))?;
        check(self.vocab.action_bins >= 1, "vocab.action_bins", "must be at least 1")?;

        check(self.decode.window >= 1, "decode.W", "must be at least 1")?;
        check(self.decode.horizon >= 1, "decode.T", "must be at least 1")?;

        check(self.drift.eps.is_finite() && self.drift.eps >= 0.0, "drift.eps", "must be finite and nonnegative")?;
        check(
            self.drift.delta_q.is_finite() && self.drift.delta_q >= 0.0,
            "drift.delta_q",
            "must be finite and nonnegative",
        )?;
        unit("drift.alpha", self.drift.alpha)?;
        check(!self.drift.windows.is_empty(), "drift.windows", "needs at least one window")?;
        for (i, &w) in self.drift.windows.iter().enumerate() {
            check(w >= 1, &format!("drift.windows[{i}]"), "must be at least 1")?;
        }
        check(self.drift.horizon >= 1, "drift.T", "must be at least 1")?;
        check(self.drift.trials >= 1, "drift.trials", "must be at least 1")?;

        self.reward.to_core().validate().map_err(|e| invalid("reward", e))?;

        let t = &self.train;
        check(t.group_size >= 2, "train.group_size", "must be at least 2")?;
        check(t.seq_len >= 1, "train.seq_len", "must be at least 1")?;
        check(t.lr.is_finite() && t.lr >= 0.0, "train.lr", "must be finite and nonnegative")?;
        check(t.inner_steps >= 1, "train.inner_steps", "must be at least 1")?;
        check(t.vocab >= 2, "train.vocab", "must be at least 2")?;
        check((t.target as usize) < t.vocab, "train.target", "must be below train.vocab")?;
        check(t.init_scale.is_finite() && t.init_scale >= 0.0, "train.init_scale", "must be finite and nonnegative")?;

        let w = &self.world;
        let tc = w.tokenizer_config();
        check(w.extent >= 1 && w.extent <= tc.height.min(tc.width), "world.extent", "must fit inside the frame")?;
        unit("world.background", w.background)?;
        unit("world.corruption", w.corruption)?;
        unit("world.persistence", w.persistence)?;

        check(self.metrics.tau >= 1, "metrics.tau", "must be at least 1")?;
        check(self.metrics.theta.is_finite(), "metrics.theta", "must be finite")?;
        check(self.metrics.kernel >= 1, "metrics.kernel", "must be at least 1")?;
        Ok(())
    }

    pub fn layout(&self) -> Result<VocabLayout, ConfigError> {
        let k = FsqLevels::new(&self.vocab.levels).map_err(|e| invalid("vocab.levels", e))?.codebook_size();
        VocabLayout::new(k, self.vocab.action_bins).map_err(|e| invalid("vocab", e))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.train.iterations,
            group_size: self.train.group_size,
            seq_len: self.train.seq_len,
            lr: self.train.lr,
            inner_steps: self.train.inner_steps,
            reward: self.reward.to_core(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Writes the effective configuration into `dir`.
    pub fn write_echo(&self, dir: &Path) -> Result<PathBuf, ConfigError> {
        fs::create_dir_all(dir).map_err(|e| ConfigError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(ECHO_FILE);
        fs::write(&path, self.to_json() + "\n").map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = if text.trim().is_empty() {
        RunConfig::default()
    } else {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}
