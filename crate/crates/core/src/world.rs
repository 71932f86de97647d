//! A one-object pixel world, a lossy patch tokenizer over it and a
//! noise-injectable oracle predictor.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::{Rng, RngCore};

use crate::action::{ActionRangeTable, ActionTokenBlock, DEFAULT_BIN_EPSILON};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::fsq::{CodeIndex, Codeword, FsqLevels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Up, Move::Down, Move::Left, Move::Right, Move::Stay];

    /// Unit displacement `(drow, dcol)`.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
            Move::Stay => (0, 0),
        }
    }

    /// Continuous action vector `(drow, dcol, 0, …)` of length `dims`.
    pub fn vector(self, dims: usize) -> Vec<f64> {
        let (dr, dc) = self.delta();
        let mut v = vec![0.0; dims];
        if let Some(x) = v.get_mut(0) {
            *x = dr as f64;
        }
        if let Some(x) = v.get_mut(1) {
            *x = dc as f64;
        }
        v
    }

    pub fn random(rng: &mut dyn RngCore) -> Move {
        Move::ALL[rng.gen_range(0..Move::ALL.len())]
    }
}

impl FromStr for Move {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(Move::Up),
            "down" => Ok(Move::Down),
            "left" => Ok(Move::Left),
            "right" => Ok(Move::Right),
            "stay" => Ok(Move::Stay),
            _ => Err(Error::UnknownAction(s.to_string())),
        }
    }
}

/// Square object on a uniform background. Position is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldState {
    pub height: usize,
    pub width: usize,
    pub row: usize,
    pub col: usize,
    pub extent: usize,
    /// Pixels moved per step.
    pub cell: usize,
    pub background: f64,
}

impl WorldState {
    pub fn new(height: usize, width: usize, extent: usize, cell: usize, background: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::param("grid", "height and width must be positive"));
        }
        if extent > height || extent > width {
            return Err(Error::param("extent", "object larger than the grid"));
        }
        if !(0.0..=1.0).contains(&background) {
            return Err(Error::param("background", "intensity must lie in [0, 1]"));
        }
        Ok(WorldState { height, width, row: 0, col: 0, extent, cell, background })
    }

    /// Places the object, clamping it inside the grid.
    pub fn at(mut self, row: usize, col: usize) -> Self {
        self.row = row.min(self.height - self.extent);
        self.col = col.min(self.width - self.extent);
        self
    }

    /// Object roughly at the grid center.
    pub fn centered(self) -> Self {
        let r = (self.height - self.extent) / 2;
        let c = (self.width - self.extent) / 2;
        self.at(r, c)
    }

    pub fn step(&self, m: Move) -> WorldState {
        let (dr, dc) = m.delta();
        let clamp = |pos: usize, d: i64, limit: usize| -> usize {
            let moved = pos as i64 + d * self.cell as i64;
            moved.clamp(0, limit as i64) as usize
        };
        WorldState {
            row: clamp(self.row, dr, self.height - self.extent),
            col: clamp(self.col, dc, self.width - self.extent),
            ..*self
        }
    }

    pub fn render(&self) -> Frame {
        let (r0, c0, e) = (self.row, self.col, self.extent);
        Frame::from_fn(self.width, self.height, |r, c| {
            if (r0..r0 + e).contains(&r) && (c0..c0 + e).contains(&c) {
                1.0
            } else {
                self.background
            }
        })
        .expect("world dimensions are validated")
    }
}

/// Ground-truth episode: `states[0]` is the start, `states[t]` follows `moves[t-1]`.
#[derive(Debug, Clone)]
pub struct Episode {
    pub states: Vec<WorldState>,
    pub moves: Vec<Move>,
}

impl Episode {
    pub fn run(start: WorldState, moves: Vec<Move>) -> Self {
        let mut states = Vec::with_capacity(moves.len() + 1);
        states.push(start);
        for &m in &moves {
            let next = states[states.len() - 1].step(m);
            states.push(next);
        }
        Episode { states, moves }
    }

    /// Random moves, never choosing `Stay`.
    pub fn random(start: WorldState, steps: usize, rng: &mut dyn RngCore) -> Self {
        let moves = (0..steps).map(|_| Move::ALL[rng.gen_range(0..4)]).collect();
        Episode::run(start, moves)
    }

    pub fn frames(&self) -> Vec<Frame> {
        self.states.iter().map(WorldState::render).collect()
    }

    /// Action token blocks for each move, using the unit range table.
    pub fn action_blocks(&self, table: &ActionRangeTable, offset: u32) -> Result<Vec<ActionTokenBlock>> {
        self.moves.iter().map(|m| table.discretize(&m.vector(table.dims()), offset)).collect()
    }
}

/// Range table for the world's unit moves: every dimension spans `[-1, 1]`.
pub fn move_action_table(dims: usize, bins: u32) -> Result<ActionRangeTable> {
    ActionRangeTable::new(vec![-1.0; dims], vec![1.0; dims], bins, DEFAULT_BIN_EPSILON)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyTokenizerConfig {
    pub height: usize,
    pub width: usize,
    pub context_patch: usize,
    pub dynamics_patch: usize,
    /// One FSQ dimension per horizontal band of a patch.
    pub levels: Vec<u32>,
}

impl ToyTokenizerConfig {
    /// 32×32 frames, 4×4 context patches, 8×8 dynamics patches, levels (7,5).
    pub fn desk() -> Self {
        ToyTokenizerConfig { height: 32, width: 32, context_patch: 4, dynamics_patch: 8, levels: vec![7, 5] }
    }

    /// 320×256 frames with 8×8 context and 32×32 dynamics patches: 1280 / 80 tokens.
    pub fn reference_size() -> Self {
        ToyTokenizerConfig { height: 320, width: 256, context_patch: 8, dynamics_patch: 32, levels: vec![7, 5] }
    }
}

/// Patch-mean tokenizer.
///
/// Each patch is cut into one horizontal band per FSQ dimension and each band
/// mean `v` is quantized on that dimension's lattice (`L − 1` steps over
/// `[0, 1]`). Dynamics tokens quantize the coarser bands of the
/// context-decoded frame, so both streams are idempotent under re-encoding.
#[derive(Debug, Clone)]
pub struct ToyTokenizer {
    cfg: ToyTokenizerConfig,
    fsq: FsqLevels,
}

#[derive(Debug, Clone, Copy)]
struct Band {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
}

impl ToyTokenizer {
    pub fn new(cfg: ToyTokenizerConfig) -> Result<Self> {
        let fsq = FsqLevels::new(&cfg.levels)?;
        let d = cfg.levels.len();
        let (cp, dp) = (cfg.context_patch, cfg.dynamics_patch);
        if cp == 0 || dp == 0 {
            return Err(Error::param("patch", "patch sizes must be positive"));
        }
        if cfg.height % dp != 0 || cfg.width % dp != 0 {
            return Err(Error::param("patch", "frame dimensions must be divisible by the dynamics patch"));
        }
        if dp % cp != 0 {
            return Err(Error::param("patch", "dynamics patch must be a multiple of the context patch"));
        }
        if cp % d != 0 {
            return Err(Error::param("patch", "context patch must split evenly into one band per level"));
        }
        Ok(ToyTokenizer { cfg, fsq })
    }

    pub fn config(&self) -> &ToyTokenizerConfig {
        &self.cfg
    }

    pub fn fsq(&self) -> &FsqLevels {
        &self.fsq
    }

    pub fn context_len(&self) -> usize {
        (self.cfg.height / self.cfg.context_patch) * (self.cfg.width / self.cfg.context_patch)
    }

    pub fn dynamics_len(&self) -> usize {
        (self.cfg.height / self.cfg.dynamics_patch) * (self.cfg.width / self.cfg.dynamics_patch)
    }

    pub fn codebook_size(&self) -> u32 {
        self.fsq.codebook_size()
    }

    /// Largest quantization error of a single band mean.
    pub fn half_step(&self) -> f64 {
        self.cfg.levels.iter().map(|&l| 0.5 / (l - 1) as f64).fold(0.0, f64::max)
    }

    /// `(patch index, band index, rows/cols)` in patch-major order.
    fn bands(&self, patch: usize) -> impl Iterator<Item = (usize, usize, Band)> + '_ {
        let per_row = self.cfg.width / patch;
        let count = (self.cfg.height / patch) * per_row;
        let d = self.cfg.levels.len();
        let bh = patch / d;
        (0..count).flat_map(move |p| {
            let (pr, pc) = (p / per_row, p % per_row);
            (0..d).map(move |i| {
                let r0 = pr * patch + i * bh;
                (p, i, Band { r0, r1: r0 + bh, c0: pc * patch, c1: (pc + 1) * patch })
            })
        })
    }

    fn band_mean(&self, pixels: &[f64], b: Band) -> f64 {
        let w = self.cfg.width;
        let mut sum = 0.0;
        for r in b.r0..b.r1 {
            sum += pixels[r * w + b.c0..r * w + b.c1].iter().sum::<f64>();
        }
        sum / ((b.r1 - b.r0) * (b.c1 - b.c0)) as f64
    }

    fn fill(&self, pixels: &mut [f64], b: Band, v: f64) {
        let w = self.cfg.width;
        for r in b.r0..b.r1 {
            pixels[r * w + b.c0..r * w + b.c1].fill(v);
        }
    }

    /// FSQ digit for intensity `v` on dimension `dim`.
    fn quantize_value(&self, dim: usize, v: f64) -> i32 {
        let (lo, hi) = self.fsq.digit_range(dim);
        let target = lo as f64 + v.clamp(0.0, 1.0) * (hi - lo) as f64;
        let z = self.fsq.unbound(dim, target);
        let mut z_vec = vec![0.0; self.fsq.dims()];
        z_vec[dim] = z;
        self.fsq.quantize(&z_vec).map(|c| c.0[dim]).unwrap_or(lo)
    }

    fn digit_value(&self, dim: usize, digit: i32) -> f64 {
        let (lo, hi) = self.fsq.digit_range(dim);
        (digit - lo) as f64 / (hi - lo) as f64
    }

    fn tokens_for(&self, pixels: &[f64], patch: usize, count: usize) -> Vec<u32> {
        let d = self.cfg.levels.len();
        let mut digits = vec![0i32; count * d];
        for (p, i, b) in self.bands(patch) {
            digits[p * d + i] = self.quantize_value(i, self.band_mean(pixels, b));
        }
        digits
            .chunks_exact(d)
            .map(|c| self.fsq.encode_index(&Codeword(c.to_vec())).expect("digits in range").0)
            .collect()
    }

    fn digits_of(&self, tokens: &[u32], expected: usize) -> Result<Vec<Codeword>> {
        if tokens.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: tokens.len() });
        }
        tokens.iter().map(|&t| self.fsq.decode_index(CodeIndex(t))).collect()
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        if frame.width() != self.cfg.width || frame.height() != self.cfg.height || frame.channels() != 1 {
            return Err(Error::Shape(alloc::format!(
                "tokenizer expects {}x{}x1, got {}x{}x{}",
                self.cfg.width,
                self.cfg.height,
                frame.width(),
                frame.height(),
                frame.channels()
            )));
        }
        Ok(())
    }

    pub fn encode_context(&self, frame: &Frame) -> Result<Vec<u32>> {
        self.check_frame(frame)?;
        Ok(self.tokens_for(frame.data(), self.cfg.context_patch, self.context_len()))
    }

    /// Piecewise-constant reconstruction from context tokens alone.
    pub fn decode_context(&self, ctx: &[u32]) -> Result<Frame> {
        let words = self.digits_of(ctx, self.context_len())?;
        let mut px = vec![0.0; self.cfg.height * self.cfg.width];
        for (p, i, b) in self.bands(self.cfg.context_patch) {
            self.fill(&mut px, b, self.digit_value(i, words[p].0[i]));
        }
        Frame::new(self.cfg.width, self.cfg.height, 1, px)
    }

    pub fn encode_frame(&self, frame: &Frame) -> Result<(Vec<u32>, Vec<u32>)> {
        let ctx = self.encode_context(frame)?;
        let coarse = self.decode_context(&ctx)?;
        let dyn_tokens = self.tokens_for(coarse.data(), self.cfg.dynamics_patch, self.dynamics_len());
        Ok((ctx, dyn_tokens))
    }

    /// Context detail wherever it agrees with the dynamics tokens, flat
    /// dynamics values elsewhere.
    pub fn decode_tokens(&self, ctx: &[u32], dyn_tokens: &[u32]) -> Result<Frame> {
        let base = self.decode_context(ctx)?;
        let words = self.digits_of(dyn_tokens, self.dynamics_len())?;
        let mut px = base.data().to_vec();
        for (p, i, b) in self.bands(self.cfg.dynamics_patch) {
            let digit = words[p].0[i];
            if self.quantize_value(i, self.band_mean(base.data(), b)) != digit {
                self.fill(&mut px, b, self.digit_value(i, digit));
            }
        }
        Frame::new(self.cfg.width, self.cfg.height, 1, px)
    }
}

/// Replaces each token by a uniform codebook index with probability `p`.
pub fn oracle_predictor(truth: &[u32], p: f64, codebook: u32, rng: &mut dyn RngCore) -> Result<Vec<u32>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if codebook == 0 {
        return Err(Error::param("K", "codebook size must be positive"));
    }
    Ok(truth
        .iter()
        .map(|&t| if rng.gen::<f64>() < p { rng.gen_range(0..codebook) } else { t })
        .collect())
}
