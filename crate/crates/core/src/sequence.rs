//! Joint vocabulary and the interleaved `[ctx ‖ d_1 a_1 ‖ … ‖ d_n a_n]` layout.

use alloc::vec;
use alloc::vec::Vec;

use crate::action::ActionTokenBlock;
use crate::error::{Error, Result};

/// Offsets of the joint vocabulary: dynamics `[0,K)`, context `[K,2K)`,
/// action `[2K,2K+B_a)`, then BOS and EOS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabLayout {
    codebook: u32,
    action_bins: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Dynamics,
    Context,
    Action,
    Bos,
    Eos,
}

impl VocabLayout {
    pub fn new(codebook: u32, action_bins: u32) -> Result<Self> {
        if codebook == 0 {
            return Err(Error::param("K", "codebook size must be positive"));
        }
        if action_bins == 0 {
            return Err(Error::param("B_a", "action bin count must be positive"));
        }
        codebook
            .checked_mul(2)
            .and_then(|v| v.checked_add(action_bins))
            .and_then(|v| v.checked_add(2))
            .ok_or_else(|| Error::param("K", "vocabulary size overflows u32"))?;
        Ok(VocabLayout { codebook, action_bins })
    }

    pub fn codebook_size(&self) -> u32 {
        self.codebook
    }

    pub fn action_bins(&self) -> u32 {
        self.action_bins
    }

    pub fn context_offset(&self) -> u32 {
        self.codebook
    }

    pub fn action_offset(&self) -> u32 {
        2 * self.codebook
    }

    pub fn bos(&self) -> u32 {
        2 * self.codebook + self.action_bins
    }

    pub fn eos(&self) -> u32 {
        self.bos() + 1
    }

    /// `V = 2K + B_a + 2`.
    pub fn vocab_size(&self) -> u32 {
        self.bos() + 2
    }

    pub fn classify(&self, id: u32) -> Result<TokenKind> {
        let k = self.codebook;
        Ok(match id {
            _ if id < k => TokenKind::Dynamics,
            _ if id < 2 * k => TokenKind::Context,
            _ if id < self.bos() => TokenKind::Action,
            _ if id == self.bos() => TokenKind::Bos,
            _ if id == self.eos() => TokenKind::Eos,
            _ => {
                return Err(Error::IndexOutOfRange { index: id as u64, size: self.vocab_size() as u64 })
            }
        })
    }
}

pub fn classify_token(id: u32, layout: &VocabLayout) -> Result<TokenKind> {
    layout.classify(id)
}

/// Clip geometry: `frames` total, `context_frames` of them encoded as context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipSpec {
    pub frames: usize,
    pub context_frames: usize,
    pub context_tokens: usize,
    pub dynamics_tokens: usize,
    pub action_dims: usize,
}

impl ClipSpec {
    pub fn new(
        frames: usize,
        context_frames: usize,
        context_tokens: usize,
        dynamics_tokens: usize,
        action_dims: usize,
    ) -> Result<Self> {
        let spec = ClipSpec { frames, context_frames, context_tokens, dynamics_tokens, action_dims };
        spec.validate()?;
        Ok(spec)
    }

    /// 8 frames, 1 context frame, 1280 context tokens, 80 dynamics tokens per
    /// frame and 13 action dimensions.
    pub fn reference() -> Self {
        ClipSpec { frames: 8, context_frames: 1, context_tokens: 1280, dynamics_tokens: 80, action_dims: 13 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_frames < 1 {
            return Err(Error::param("t_c", "at least one context frame is required"));
        }
        if self.frames <= self.context_frames {
            return Err(Error::param("T", "need at least one dynamics frame (T > t_c)"));
        }
        if self.context_tokens == 0 {
            return Err(Error::param("N_c", "must be positive"));
        }
        if self.dynamics_tokens == 0 {
            return Err(Error::param("N_d", "must be positive"));
        }
        if self.action_dims == 0 {
            return Err(Error::param("D_a", "must be positive"));
        }
        Ok(())
    }

    /// `t_d = T − t_c`.
    pub fn dynamics_frames(&self) -> usize {
        self.frames - self.context_frames
    }

    /// `S = N_c + t_d·(N_d + D_a)`.
    pub fn sequence_len(&self) -> usize {
        self.context_tokens + self.dynamics_frames() * (self.dynamics_tokens + self.action_dims)
    }

    /// `N_c + t_d·N_d`.
    pub fn visual_tokens(&self) -> usize {
        self.context_tokens + self.dynamics_frames() * self.dynamics_tokens
    }

    /// `(t_d − 1)·N_d`.
    pub fn supervised_count(&self) -> usize {
        (self.dynamics_frames() - 1) * self.dynamics_tokens
    }
}

/// What a sequence position holds. Frames and steps are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Context,
    Dynamics { frame: usize },
    Action { step: usize },
}

impl Segment {
    pub fn kind(&self) -> TokenKind {
        match self {
            Segment::Context => TokenKind::Context,
            Segment::Dynamics { .. } => TokenKind::Dynamics,
            Segment::Action { .. } => TokenKind::Action,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    ids: Vec<u32>,
    segments: Vec<Segment>,
    spec: ClipSpec,
    layout: VocabLayout,
}

/// Raw inputs recovered from a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceParts {
    pub context: Vec<u32>,
    pub dynamics: Vec<Vec<u32>>,
    pub actions: Vec<ActionTokenBlock>,
}

/// Interleaves context, dynamics and action tokens.
///
/// Context indices are shifted by `K`; dynamics indices are stored raw; action
/// blocks arrive already offset. Exactly `t_d` action blocks are required: the
/// last one repeats the action of the final transition when the clip has no
/// further step.
pub fn build_sequence(
    context: &[u32],
    dynamics: &[Vec<u32>],
    actions: &[ActionTokenBlock],
    layout: &VocabLayout,
    spec: &ClipSpec,
) -> Result<TokenSequence> {
    spec.validate()?;
    let k = layout.codebook_size();
    if context.len() != spec.context_tokens {
        return Err(Error::Shape(alloc::format!(
            "context has {} tokens, expected {}",
            context.len(),
            spec.context_tokens
        )));
    }
    if dynamics.len() != spec.dynamics_frames() || actions.len() != spec.dynamics_frames() {
        return Err(Error::Shape(alloc::format!(
            "got {} dynamics and {} action blocks, expected {} of each",
            dynamics.len(),
            actions.len(),
            spec.dynamics_frames()
        )));
    }

    let mut ids = Vec::with_capacity(spec.sequence_len());
    let mut segments = Vec::with_capacity(spec.sequence_len());
    for &c in context {
        if c >= k {
            return Err(Error::IndexOutOfRange { index: c as u64, size: k as u64 });
        }
        ids.push(c + k);
        segments.push(Segment::Context);
    }
    for (i, (block, action)) in dynamics.iter().zip(actions).enumerate() {
        let frame = i + 1;
        if block.len() != spec.dynamics_tokens {
            return Err(Error::Shape(alloc::format!(
                "dynamics block {frame} has {} tokens, expected {}",
                block.len(),
                spec.dynamics_tokens
            )));
        }
        if action.0.len() != spec.action_dims {
            return Err(Error::Shape(alloc::format!(
                "action block {frame} has {} tokens, expected {}",
                action.0.len(),
                spec.action_dims
            )));
        }
        for &d in block {
            if d >= k {
                return Err(Error::IndexOutOfRange { index: d as u64, size: k as u64 });
            }
            ids.push(d);
            segments.push(Segment::Dynamics { frame });
        }
        for &a in &action.0 {
            if layout.classify(a)? != TokenKind::Action {
                return Err(Error::TokenOutOfSegment { token: a, segment: "action" });
            }
            ids.push(a);
            segments.push(Segment::Action { step: frame });
        }
    }
    Ok(TokenSequence { ids, segments, spec: *spec, layout: *layout })
}

impl TokenSequence {
    /// Rebuilds a sequence from stored ids, checking every id against the
    /// segment its position demands.
    pub fn from_ids(ids: Vec<u32>, layout: &VocabLayout, spec: &ClipSpec) -> Result<Self> {
        spec.validate()?;
        if ids.len() != spec.sequence_len() {
            return Err(Error::DimensionMismatch { expected: spec.sequence_len(), found: ids.len() });
        }
        let segments = segment_map(spec);
        for (&id, seg) in ids.iter().zip(&segments) {
            if layout.classify(id)? != seg.kind() {
                return Err(Error::TokenOutOfSegment {
                    token: id,
                    segment: match seg.kind() {
                        TokenKind::Context => "context",
                        TokenKind::Dynamics => "dynamics",
                        _ => "action",
                    },
                });
            }
        }
        Ok(TokenSequence { ids, segments, spec: *spec, layout: *layout })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn spec(&self) -> &ClipSpec {
        &self.spec
    }

    pub fn layout(&self) -> &VocabLayout {
        &self.layout
    }

    /// Segment-wise extraction, undoing the context offset.
    pub fn split(&self) -> SequenceParts {
        let k = self.layout.codebook_size();
        let n = self.spec.dynamics_frames();
        let mut parts = SequenceParts {
            context: Vec::with_capacity(self.spec.context_tokens),
            dynamics: vec![Vec::with_capacity(self.spec.dynamics_tokens); n],
            actions: vec![ActionTokenBlock(Vec::with_capacity(self.spec.action_dims)); n],
        };
        for (&id, seg) in self.ids.iter().zip(&self.segments) {
            match *seg {
                Segment::Context => parts.context.push(id - k),
                Segment::Dynamics { frame } => parts.dynamics[frame - 1].push(id),
                Segment::Action { step } => parts.actions[step - 1].0.push(id),
            }
        }
        parts
    }
}

fn segment_map(spec: &ClipSpec) -> Vec<Segment> {
    let mut segments = Vec::with_capacity(spec.sequence_len());
    segments.extend(core::iter::repeat(Segment::Context).take(spec.context_tokens));
    for frame in 1..=spec.dynamics_frames() {
        segments.extend(core::iter::repeat(Segment::Dynamics { frame }).take(spec.dynamics_tokens));
        segments.extend(core::iter::repeat(Segment::Action { step: frame }).take(spec.action_dims));
    }
    segments
}

/// Per-position supervision flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossMask {
    supervised: Vec<bool>,
}

impl LossMask {
    pub fn supervised(&self) -> &[bool] {
        &self.supervised
    }

    pub fn count(&self) -> usize {
        self.supervised.iter().filter(|&&b| b).count()
    }
}

/// Only dynamics tokens after the first dynamics frame are supervised.
pub fn build_loss_mask(spec: &ClipSpec) -> Result<LossMask> {
    spec.validate()?;
    let supervised = segment_map(spec)
        .into_iter()
        .map(|seg| matches!(seg, Segment::Dynamics { frame } if frame >= 2))
        .collect();
    Ok(LossMask { supervised })
}
