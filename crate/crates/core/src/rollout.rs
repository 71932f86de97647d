//! Autoregressive and sliding-window re-encoding (SWR) decoding over abstract
//! predictor and codec interfaces.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::RngCore;

use crate::action::ActionTokenBlock;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::sequence::ClipSpec;
use crate::world::ToyTokenizer;

/// Pixel codec: one frame to `(context, dynamics)` raw indices and back.
pub trait FrameCodec {
    fn context_len(&self) -> usize;
    fn dynamics_len(&self) -> usize;
    fn codebook_size(&self) -> u32;
    fn encode(&self, frame: &Frame) -> Result<(Vec<u32>, Vec<u32>)>;
    fn decode(&self, context: &[u32], dynamics: &[u32]) -> Result<Frame>;
}

impl FrameCodec for ToyTokenizer {
    fn context_len(&self) -> usize {
        ToyTokenizer::context_len(self)
    }

    fn dynamics_len(&self) -> usize {
        ToyTokenizer::dynamics_len(self)
    }

    fn codebook_size(&self) -> u32 {
        ToyTokenizer::codebook_size(self)
    }

    fn encode(&self, frame: &Frame) -> Result<(Vec<u32>, Vec<u32>)> {
        self.encode_frame(frame)
    }

    fn decode(&self, context: &[u32], dynamics: &[u32]) -> Result<Frame> {
        self.decode_tokens(context, dynamics)
    }
}

/// Token prompt for generating frame `step` (1-based).
///
/// Layout: `[ctx | dyn(seed_step) | a | dyn(seed_step+1) | a | …]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub tokens: Vec<u32>,
    pub step: usize,
    pub segment: usize,
    /// Frame index the seeding dynamics block was encoded from.
    pub seed_step: usize,
    pub context_len: usize,
    pub dynamics_len: usize,
    pub action_len: usize,
}

impl Prompt {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `(frame index, raw block)` for every dynamics block in the prompt.
    pub fn dynamics_blocks(&self) -> impl Iterator<Item = (usize, &[u32])> + '_ {
        let stride = self.dynamics_len + self.action_len;
        self.tokens[self.context_len..]
            .chunks(stride)
            .filter(move |c| c.len() >= self.dynamics_len)
            .enumerate()
            .map(move |(i, c)| (self.seed_step + i, &c[..self.dynamics_len]))
    }
}

/// Next-frame dynamics predictor: returns `N_d` raw indices.
pub trait Predictor {
    fn predict(&mut self, prompt: &Prompt, rng: &mut dyn RngCore) -> Result<Vec<u32>>;
}

/// Optional monotonic clock for re-encoding timestamps.
pub trait Clock {
    fn now_nanos(&self) -> Option<u64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_nanos(&self) -> Option<u64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Ar,
    Swr { window: usize },
}

impl DecodeMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            DecodeMode::Swr { window: 0 } => Err(Error::param("W", "window must be at least 1")),
            _ => Ok(()),
        }
    }

    /// Effective window for a horizon of `horizon` frames.
    pub fn window(&self, horizon: usize) -> usize {
        match *self {
            DecodeMode::Ar => horizon,
            DecodeMode::Swr { window } => window.min(horizon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub step: usize,
    pub segment: usize,
    pub prompt_len: usize,
    /// Context was re-encoded right before this step.
    pub reencode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReencodeEvent {
    /// Frame index whose decoded image became the new context.
    pub after_step: usize,
    pub nanos: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RolloutTrace {
    pub steps: Vec<StepRecord>,
    pub reencodes: Vec<ReencodeEvent>,
    /// Inclusive `(first, last)` frame index of each segment.
    pub segments: Vec<(usize, usize)>,
}

impl RolloutTrace {
    pub fn max_prompt_len(&self) -> usize {
        self.steps.iter().map(|s| s.prompt_len).max().unwrap_or(0)
    }

    pub fn mean_prompt_len(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.prompt_len as f64).sum::<f64>() / self.steps.len() as f64
    }

    pub fn reencode_count(&self) -> usize {
        self.reencodes.len()
    }

    /// Trace without wall-time data, for determinism comparisons.
    pub fn untimed(&self) -> RolloutTrace {
        RolloutTrace {
            reencodes: self.reencodes.iter().map(|e| ReencodeEvent { nanos: None, ..*e }).collect(),
            ..self.clone()
        }
    }
}

/// Decoded frames `x̂_1..x̂_T` and the trace.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub frames: Vec<Frame>,
    pub trace: RolloutTrace,
}

pub fn decode_ar<P: Predictor + ?Sized, C: FrameCodec + ?Sized>(
    predictor: &mut P,
    codec: &C,
    x0: &Frame,
    actions: &[ActionTokenBlock],
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<Rollout> {
    rollout(predictor, codec, x0, actions, horizon, DecodeMode::Ar, rng, &NoClock)
}

pub fn decode_swr<P: Predictor + ?Sized, C: FrameCodec + ?Sized>(
    predictor: &mut P,
    codec: &C,
    x0: &Frame,
    actions: &[ActionTokenBlock],
    horizon: usize,
    window: usize,
    rng: &mut dyn RngCore,
) -> Result<Rollout> {
    rollout(predictor, codec, x0, actions, horizon, DecodeMode::Swr { window }, rng, &NoClock)
}

/// Generic rollout; AR is the single-segment case.
///
/// `actions[t-1]` drives the transition into frame `t`. Each segment starts
/// from `[ctx + K | dyn_0 | a]`; every generated block is appended and followed
/// by the next action while the segment continues. At a segment boundary the
/// last decoded frame is re-encoded into fresh `(ctx, dyn_0)`.
#[allow(clippy::too_many_arguments)]
pub fn rollout<P: Predictor + ?Sized, C: FrameCodec + ?Sized>(
    predictor: &mut P,
    codec: &C,
    x0: &Frame,
    actions: &[ActionTokenBlock],
    horizon: usize,
    mode: DecodeMode,
    rng: &mut dyn RngCore,
    clock: &dyn Clock,
) -> Result<Rollout> {
    mode.validate()?;
    if horizon == 0 {
        return Err(Error::param("T", "horizon must be at least 1"));
    }
    if actions.len() < horizon {
        return Err(Error::Shape(alloc::format!("{} action blocks for horizon {horizon}", actions.len())));
    }
    let k = codec.codebook_size();
    let n_d = codec.dynamics_len();
    let window = mode.window(horizon);

    let mut frames = Vec::with_capacity(horizon);
    let mut trace = RolloutTrace::default();
    let (mut ctx, mut dyn0) = codec.encode(x0)?;
    let mut start = 1;
    let mut segment = 0;

    while start <= horizon {
        let end = (start + window - 1).min(horizon);
        trace.segments.push((start, end));
        let action_len = actions[start - 1].0.len();
        let mut prompt = Prompt {
            tokens: Vec::with_capacity(codec.context_len() + (end - start + 2) * (n_d + action_len)),
            step: start,
            segment,
            seed_step: start - 1,
            context_len: ctx.len(),
            dynamics_len: n_d,
            action_len,
        };
        prompt.tokens.extend(ctx.iter().map(|&c| c + k));
        prompt.tokens.extend_from_slice(&dyn0);
        prompt.tokens.extend_from_slice(&actions[start - 1].0);

        let mut generated = Vec::with_capacity(end - start + 1);
        for step in start..=end {
            prompt.step = step;
            trace.steps.push(StepRecord {
                step,
                segment,
                prompt_len: prompt.len(),
                reencode: segment > 0 && step == start,
            });
            let block = predictor
                .predict(&prompt, rng)
                .map_err(|e| Error::Predictor { step, source: Box::new(e) })?;
            if block.len() != n_d {
                return Err(Error::Predictor {
                    step,
                    source: Box::new(Error::DimensionMismatch { expected: n_d, found: block.len() }),
                });
            }
            if let Some(&bad) = block.iter().find(|&&t| t >= k) {
                return Err(Error::Predictor {
                    step,
                    source: Box::new(Error::IndexOutOfRange { index: bad as u64, size: k as u64 }),
                });
            }
            if step < end {
                prompt.tokens.extend_from_slice(&block);
                prompt.tokens.extend_from_slice(&actions[step].0);
            }
            generated.push(block);
        }

        for block in &generated {
            frames.push(codec.decode(&ctx, block)?);
        }
        if end < horizon {
            let last = frames.last().expect("segment produced frames");
            (ctx, dyn0) = codec.encode(last)?;
            trace.reencodes.push(ReencodeEvent { after_step: end, nanos: clock.now_nanos() });
        }
        start = end + 1;
        segment += 1;
    }
    Ok(Rollout { frames, trace })
}

/// Analytic `(max, mean)` prompt length over all generation steps.
pub fn prompt_length_profile(spec: &ClipSpec, horizon: usize, mode: DecodeMode) -> Result<(usize, f64)> {
    spec.validate()?;
    mode.validate()?;
    if horizon == 0 {
        return Err(Error::param("T", "horizon must be at least 1"));
    }
    let base = spec.context_tokens + spec.dynamics_tokens + spec.action_dims;
    let stride = spec.dynamics_tokens + spec.action_dims;
    let w = mode.window(horizon);
    let max = base + (w - 1) * stride;
    let mut total = 0usize;
    let mut start = 1;
    while start <= horizon {
        let len = w.min(horizon - start + 1);
        // Σ_{j<len} (base + j·stride)
        total += len * base + stride * len * (len - 1) / 2;
        start += len;
    }
    Ok((max, total as f64 / horizon as f64))
}

/// Number of context refreshes, `⌈T/W⌉ − 1`.
pub fn reencode_count(horizon: usize, mode: DecodeMode) -> usize {
    let w = mode.window(horizon).max(1);
    horizon.div_ceil(w).saturating_sub(1)
}

/// Oracle over known ground-truth dynamics blocks with i.i.d. token corruption.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    truth: Vec<Vec<u32>>,
    corruption: f64,
    codebook: u32,
}

impl OraclePredictor {
    /// `truth[t-1]` is the block for frame `t`.
    pub fn new(truth: Vec<Vec<u32>>, corruption: f64, codebook: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&corruption) {
            return Err(Error::InvalidProbability(corruption));
        }
        Ok(OraclePredictor { truth, corruption, codebook })
    }

    /// Ground truth taken from the codec's encoding of each frame.
    pub fn from_frames<C: FrameCodec + ?Sized>(codec: &C, frames: &[Frame], corruption: f64) -> Result<Self> {
        let truth = frames.iter().map(|f| codec.encode(f).map(|(_, d)| d)).collect::<Result<_>>()?;
        OraclePredictor::new(truth, corruption, codec.codebook_size())
    }
}

impl Predictor for OraclePredictor {
    fn predict(&mut self, prompt: &Prompt, rng: &mut dyn RngCore) -> Result<Vec<u32>> {
        let truth = self
            .truth
            .get(prompt.step - 1)
            .ok_or(Error::IndexOutOfRange { index: prompt.step as u64, size: self.truth.len() as u64 })?;
        crate::world::oracle_predictor(truth, self.corruption, self.codebook, rng)
    }
}

/// Oracle whose errors persist through its own prompt.
///
/// For each token position, every dynamics block in the prompt that disagrees
/// with ground truth at that position is re-emitted with probability
/// `persistence`, most recent first; otherwise the true token is used. The
/// result is then corrupted like [`OraclePredictor`]. AR prompts keep every
/// past mistake, SWR prompts only those since the last refresh.
#[derive(Debug, Clone)]
pub struct HistoryPredictor {
    /// `truth[t]` is the block for frame `t`, including `t = 0`.
    truth: Vec<Vec<u32>>,
    corruption: f64,
    persistence: f64,
    codebook: u32,
}

impl HistoryPredictor {
    pub fn new(truth: Vec<Vec<u32>>, corruption: f64, persistence: f64, codebook: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&corruption) {
            return Err(Error::InvalidProbability(corruption));
        }
        if !(0.0..=1.0).contains(&persistence) {
            return Err(Error::InvalidProbability(persistence));
        }
        Ok(HistoryPredictor { truth, corruption, persistence, codebook })
    }

    /// `frames[0]` is the conditioning frame.
    pub fn from_frames<C: FrameCodec + ?Sized>(
        codec: &C,
        frames: &[Frame],
        corruption: f64,
        persistence: f64,
    ) -> Result<Self> {
        let truth = frames.iter().map(|f| codec.encode(f).map(|(_, d)| d)).collect::<Result<_>>()?;
        HistoryPredictor::new(truth, corruption, persistence, codec.codebook_size())
    }

    fn truth_at(&self, step: usize) -> Result<&[u32]> {
        self.truth
            .get(step)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange { index: step as u64, size: self.truth.len() as u64 })
    }
}

impl Predictor for HistoryPredictor {
    fn predict(&mut self, prompt: &Prompt, rng: &mut dyn RngCore) -> Result<Vec<u32>> {
        use rand::Rng;
        let target = self.truth_at(prompt.step)?.to_vec();
        let history: Vec<(&[u32], &[u32])> = prompt
            .dynamics_blocks()
            .map(|(s, b)| Ok((b, self.truth_at(s)?)))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(target.len());
        for (j, &t) in target.iter().enumerate() {
            let mut token = t;
            for &(block, truth) in history.iter().rev() {
                if block[j] != truth[j] && rng.gen::<f64>() < self.persistence {
                    token = block[j];
                    break;
                }
            }
            out.push(token);
        }
        crate::world::oracle_predictor(&out, self.corruption, self.codebook, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_stream;
    use crate::world::{move_action_table, Episode, ToyTokenizerConfig, WorldState};

    #[test]
    fn reference_profile_anchors() {
        let spec = ClipSpec::reference();
        assert_eq!(prompt_length_profile(&spec, 30, DecodeMode::Ar).unwrap().0, 4070);
        for (w, max, re) in [(4, 1652, 7), (6, 1838, 4), (8, 2024, 3), (10, 2210, 2), (15, 2675, 1)] {
            let mode = DecodeMode::Swr { window: w };
            assert_eq!(prompt_length_profile(&spec, 30, mode).unwrap().0, max);
            assert_eq!(reencode_count(30, mode), re);
        }
        assert_eq!(prompt_length_profile(&spec, 1, DecodeMode::Ar).unwrap().0, 1373);
        assert_eq!(prompt_length_profile(&spec, 30, DecodeMode::Swr { window: 1 }).unwrap().0, 1373);
        let (_, mean) = prompt_length_profile(&spec, 30, DecodeMode::Ar).unwrap();
        assert_eq!(mean, 2721.5);
    }

    struct Failing;

    impl Predictor for Failing {
        fn predict(&mut self, prompt: &Prompt, _rng: &mut dyn RngCore) -> Result<Vec<u32>> {
            if prompt.step == 3 {
                Err(Error::NonFinite)
            } else {
                Ok(alloc::vec![0; 16])
            }
        }
    }

    fn setup(t: usize) -> (ToyTokenizer, Episode, Vec<ActionTokenBlock>) {
        let tok = ToyTokenizer::new(ToyTokenizerConfig::desk()).unwrap();
        let start = WorldState::new(32, 32, 4, 1, 0.0).unwrap().centered();
        let ep = Episode::random(start, t, &mut derive_stream(1, "episode"));
        let table = move_action_table(2, 16).unwrap();
        let acts = ep.action_blocks(&table, 2 * tok.codebook_size()).unwrap();
        (tok, ep, acts)
    }

    #[test]
    fn predictor_error_carries_step() {
        let (tok, ep, acts) = setup(5);
        let err = decode_ar(&mut Failing, &tok, &ep.frames()[0], &acts, 5, &mut derive_stream(0, "x")).unwrap_err();
        assert!(matches!(err, Error::Predictor { step: 3, .. }));
    }

    #[test]
    fn trace_matches_profile() {
        let (tok, ep, acts) = setup(13);
        let frames = ep.frames();
        let spec = ClipSpec::new(14, 1, 64, 16, 2).unwrap();
        for mode in [DecodeMode::Ar, DecodeMode::Swr { window: 1 }, DecodeMode::Swr { window: 4 }] {
            let mut p = OraclePredictor::from_frames(&tok, &frames[1..], 0.1).unwrap();
            let r = rollout(&mut p, &tok, &frames[0], &acts, 13, mode, &mut derive_stream(2, "r"), &NoClock).unwrap();
            let (max, mean) = prompt_length_profile(&spec, 13, mode).unwrap();
            assert_eq!(r.trace.max_prompt_len(), max);
            assert_eq!(r.trace.mean_prompt_len(), mean);
            assert_eq!(r.trace.reencode_count(), reencode_count(13, mode));
            assert_eq!(r.frames.len(), 13);
        }
    }

    #[test]
    fn short_action_list_rejected() {
        let (tok, ep, acts) = setup(3);
        let mut p = OraclePredictor::from_frames(&tok, &ep.frames()[1..], 0.0).unwrap();
        assert!(decode_ar(&mut p, &tok, &ep.frames()[0], &acts, 4, &mut derive_stream(0, "x")).is_err());
        assert!(decode_swr(&mut p, &tok, &ep.frames()[0], &acts, 3, 0, &mut derive_stream(0, "x")).is_err());
    }
}
