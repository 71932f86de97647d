use std::path::{Path, PathBuf};
use std::time::Instant;

use tokenworld_core::metrics::{mse, ssim};
use tokenworld_core::rollout::{
    prompt_length_profile, reencode_count, rollout, Clock, DecodeMode, HistoryPredictor, OraclePredictor,
    Predictor, Rollout,
};
use tokenworld_core::seed::derive_stream;
use tokenworld_core::sequence::ClipSpec;
use tokenworld_core::world::{move_action_table, Episode, ToyTokenizer, WorldState};
use tokenworld_core::Frame;

use super::{CommandError, CommandResult};
use crate::config::{PredictorKind, RunConfig};
use crate::io::{fmt_f64, write_csv, write_frames};

struct WallClock(Instant);

impl Clock for WallClock {
    fn now_nanos(&self) -> Option<u64> {
        Some(self.0.elapsed().as_nanos() as u64)
    }
}

/// Ground truth `x_0..x_T`, decoded AR and SWR rollouts, and the clip spec
/// implied by the tokenizer.
pub struct SideBySide {
    pub truth: Vec<Frame>,
    pub ar: Rollout,
    pub swr: Rollout,
    pub spec: ClipSpec,
    pub ar_nanos: u64,
    pub swr_nanos: u64,
}

fn predictor(cfg: &RunConfig, tok: &ToyTokenizer, frames: &[Frame]) -> Result<Box<dyn Predictor>, CommandError> {
    let w = &cfg.world;
    Ok(match w.predictor {
        PredictorKind::Oracle => Box::new(OraclePredictor::from_frames(tok, &frames[1..], w.corruption)?),
        PredictorKind::History => Box::new(HistoryPredictor::from_frames(tok, frames, w.corruption, w.persistence)?),
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<SideBySide, CommandError> {
    let tok = ToyTokenizer::new(cfg.world.tokenizer_config())?;
    let tc = tok.config();
    let w = &cfg.world;
    let mut start = WorldState::new(tc.height, tc.width, w.extent, w.cell, w.background)?;
    start = match w.start {
        Some([r, c]) => start.at(r, c),
        None => start.centered(),
    };
    let horizon = cfg.decode.horizon;
    let episode = Episode::random(start, horizon, &mut derive_stream(cfg.seed, "episode"));
    let table = move_action_table(cfg.clip.action_dims, cfg.vocab.action_bins)?;
    let actions = episode.action_blocks(&table, 2 * tok.codebook_size())?;
    let truth = episode.frames();
    let spec = ClipSpec::new(horizon + 1, 1, tok.context_len(), tok.dynamics_len(), cfg.clip.action_dims)?;

    let run = |mode| -> Result<(Rollout, u64), CommandError> {
        let mut p = predictor(cfg, &tok, &truth)?;
        let clock = WallClock(Instant::now());
        let mut rng = derive_stream(cfg.seed, "predictor");
        let r = rollout(p.as_mut(), &tok, &truth[0], &actions, horizon, mode, &mut rng, &clock)?;
        Ok((r, clock.0.elapsed().as_nanos() as u64))
    };
    let (ar, ar_nanos) = run(DecodeMode::Ar)?;
    let (swr, swr_nanos) = run(DecodeMode::Swr { window: cfg.decode.window })?;
    Ok(SideBySide { truth, ar, swr, spec, ar_nanos, swr_nanos })
}

fn trace_rows(r: &Rollout, truth: &[Frame]) -> Result<Vec<Vec<String>>, CommandError> {
    r.trace
        .steps
        .iter()
        .map(|s| {
            let err = mse(&r.frames[s.step - 1], &truth[s.step])?;
            Ok(vec![s.step.to_string(), s.prompt_len.to_string(), u8::from(s.reencode).to_string(), fmt_f64(err)])
        })
        .collect()
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<CommandResult, CommandError> {
    let sim = simulate(cfg)?;
    let horizon = cfg.decode.horizon;
    let swr_mode = DecodeMode::Swr { window: cfg.decode.window };
    let mut artifacts: Vec<PathBuf> = Vec::new();

    artifacts.extend(write_frames(&out.join("frames/truth"), &sim.truth[1..])?);
    artifacts.extend(write_frames(&out.join("frames/ar"), &sim.ar.frames)?);
    artifacts.extend(write_frames(&out.join("frames/swr"), &sim.swr.frames)?);

    let header = ["step", "prompt_len", "reencode_flag", "frame_mse_vs_gt"];
    for (name, r) in [("trace_ar.csv", &sim.ar), ("trace_swr.csv", &sim.swr)] {
        let p = out.join(name);
        write_csv(&p, cfg.seed, &header, &trace_rows(r, &sim.truth)?)?;
        artifacts.push(p);
    }

    let mut rows = Vec::with_capacity(horizon);
    let (mut ar_mse, mut swr_mse, mut ar_ssim, mut swr_ssim) = (0.0, 0.0, 0.0, 0.0);
    for t in 1..=horizon {
        let gt = &sim.truth[t];
        let (a, s) = (&sim.ar.frames[t - 1], &sim.swr.frames[t - 1]);
        let v = [mse(a, gt)?, mse(s, gt)?, ssim(a, gt)?.mean, ssim(s, gt)?.mean];
        ar_mse += v[0];
        swr_mse += v[1];
        ar_ssim += v[2];
        swr_ssim += v[3];
        rows.push(std::iter::once(t.to_string()).chain(v.iter().map(|&x| fmt_f64(x))).collect());
    }
    let p = out.join("comparison.csv");
    write_csv(&p, cfg.seed, &["frame_index", "ar_mse", "swr_mse", "ar_ssim", "swr_ssim"], &rows)?;
    artifacts.push(p);

    let mut timing = vec![
        vec!["ar".into(), "total".into(), String::new(), sim.ar_nanos.to_string()],
        vec!["swr".into(), "total".into(), String::new(), sim.swr_nanos.to_string()],
    ];
    for e in &sim.swr.trace.reencodes {
        timing.push(vec![
            "swr".into(),
            "reencode".into(),
            e.after_step.to_string(),
            e.nanos.map(|n| n.to_string()).unwrap_or_default(),
        ]);
    }
    let p = out.join("timings.csv");
    write_csv(&p, cfg.seed, &["mode", "event", "after_step", "nanos"], &timing)?;
    artifacts.push(p);

    // the traces must match the closed-form prompt profile
    let (ar_max, ar_mean) = prompt_length_profile(&sim.spec, horizon, DecodeMode::Ar)?;
    let (swr_max, swr_mean) = prompt_length_profile(&sim.spec, horizon, swr_mode)?;
    let consistent = sim.ar.trace.max_prompt_len() == ar_max
        && sim.ar.trace.mean_prompt_len() == ar_mean
        && sim.swr.trace.max_prompt_len() == swr_max
        && sim.swr.trace.mean_prompt_len() == swr_mean
        && sim.swr.trace.reencode_count() == reencode_count(horizon, swr_mode);
    let n = horizon as f64;
    let summary = format!(
        "max prompt AR {} / SWR {}; re-encodes {}; mean mse AR {:.5} / SWR {:.5}; mean ssim AR {:.4} / SWR {:.4}{}",
        sim.ar.trace.max_prompt_len(),
        sim.swr.trace.max_prompt_len(),
        sim.swr.trace.reencode_count(),
        ar_mse / n,
        swr_mse / n,
        ar_ssim / n,
        swr_ssim / n,
        if consistent { "" } else { "; trace disagrees with prompt profile" }
    );
    Ok(CommandResult::new(consistent, artifacts, summary))
}
