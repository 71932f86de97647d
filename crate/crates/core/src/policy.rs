//! First-order Markov categorical policy with analytic GRPO gradients.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::reward::{self, GroupEntry, RewardConfig};
use crate::seed::derive_stream;

/// Logits for the first token and for each `(previous, next)` transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    vocab: usize,
    start: Vec<f64>,
    trans: Vec<f64>,
}

/// Same shape as the policy logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub start: Vec<f64>,
    pub trans: Vec<f64>,
}

impl PolicyGrad {
    pub fn zeros(vocab: usize) -> Self {
        PolicyGrad { start: vec![0.0; vocab], trans: vec![0.0; vocab * vocab] }
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.start.iter().chain(&self.trans).map(|g| g * g).sum())
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.start.iter().chain(&self.trans).copied()
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| libm::exp(l - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + libm::log(logits.iter().map(|&l| libm::exp(l - m)).sum::<f64>());
    logits.iter().map(|&l| l - lse).collect()
}

/// `KL(p‖q)` of two categoricals given by logits.
fn kl_logits(p: &[f64], q: &[f64]) -> f64 {
    let lp = log_softmax(p);
    let lq = log_softmax(q);
    lp.iter().zip(&lq).map(|(a, b)| libm::exp(*a) * (a - b)).sum()
}

/// Gradient of `KL(p‖q)` with respect to the logits of `p`.
fn kl_logits_grad(p: &[f64], q: &[f64], scale: f64, out: &mut [f64]) {
    let lp = log_softmax(p);
    let lq = log_softmax(q);
    let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| libm::exp(*a) * (a - b)).sum();
    for (i, o) in out.iter_mut().enumerate() {
        *o += scale * libm::exp(lp[i]) * (lp[i] - lq[i] - kl);
    }
}

impl TabularPolicy {
    pub fn uniform(vocab: usize) -> Result<Self> {
        TabularPolicy::from_logits(vocab, vec![0.0; vocab], vec![0.0; vocab * vocab])
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random(vocab: usize, scale: f64, rng: &mut dyn RngCore) -> Result<Self> {
        let mut draw = |n: usize| (0..n).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * scale).collect::<Vec<_>>();
        let start = draw(vocab);
        let trans = draw(vocab * vocab);
        TabularPolicy::from_logits(vocab, start, trans)
    }

    pub fn from_logits(vocab: usize, start: Vec<f64>, trans: Vec<f64>) -> Result<Self> {
        if vocab == 0 {
            return Err(Error::param("vocab", "must be positive"));
        }
        if start.len() != vocab {
            return Err(Error::DimensionMismatch { expected: vocab, found: start.len() });
        }
        if trans.len() != vocab * vocab {
            return Err(Error::DimensionMismatch { expected: vocab * vocab, found: trans.len() });
        }
        if start.iter().chain(&trans).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(TabularPolicy { vocab, start, trans })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn start_logits(&self) -> &[f64] {
        &self.start
    }

    pub fn trans_logits(&self) -> &[f64] {
        &self.trans
    }

    pub fn start_logits_mut(&mut self) -> &mut [f64] {
        &mut self.start
    }

    pub fn trans_logits_mut(&mut self) -> &mut [f64] {
        &mut self.trans
    }

    fn row(&self, prev: usize) -> &[f64] {
        &self.trans[prev * self.vocab..(prev + 1) * self.vocab]
    }

    /// Logits of the distribution at position `i` of `tokens`.
    fn state(&self, tokens: &[u32], i: usize) -> &[f64] {
        if i == 0 {
            &self.start
        } else {
            self.row(tokens[i - 1] as usize)
        }
    }

    pub fn start_probs(&self) -> Vec<f64> {
        softmax(&self.start)
    }

    pub fn next_probs(&self, prev: u32) -> Vec<f64> {
        softmax(self.row(prev as usize))
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<()> {
        match tokens.iter().find(|&&t| t as usize >= self.vocab) {
            Some(&t) => Err(Error::IndexOutOfRange { index: t as u64, size: self.vocab as u64 }),
            None => Ok(()),
        }
    }

    /// Ancestral sampling by inverse CDF. The returned log-probability is
    /// [`TabularPolicy::log_prob`] of the returned sequence.
    pub fn sample(&self, len: usize, rng: &mut dyn RngCore) -> (Vec<u32>, f64) {
        let mut tokens = Vec::with_capacity(len);
        for i in 0..len {
            let probs = softmax(self.state(&tokens, i));
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = self.vocab - 1;
            for (j, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = j;
                    break;
                }
            }
            tokens.push(pick as u32);
        }
        let lp = self.log_prob(&tokens).expect("sampled tokens are in vocabulary");
        (tokens, lp)
    }

    pub fn log_prob(&self, tokens: &[u32]) -> Result<f64> {
        self.check_tokens(tokens)?;
        Ok((0..tokens.len()).map(|i| log_softmax(self.state(tokens, i))[tokens[i] as usize]).sum())
    }

    /// Adds `scale · ∇ log p(tokens)` into `out`.
    pub fn add_grad_log_prob(&self, tokens: &[u32], scale: f64, out: &mut PolicyGrad) {
        for i in 0..tokens.len() {
            let probs = softmax(self.state(tokens, i));
            let slot = if i == 0 {
                &mut out.start[..]
            } else {
                let r = tokens[i - 1] as usize * self.vocab;
                &mut out.trans[r..r + self.vocab]
            };
            for (b, (g, p)) in slot.iter_mut().zip(&probs).enumerate() {
                let indicator = if b == tokens[i] as usize { 1.0 } else { 0.0 };
                *g += scale * (indicator - p);
            }
        }
    }

    /// Exact categorical KL to `reference` summed over the states the sequence
    /// conditions on: the start state and every prefix but the full sequence.
    pub fn kl_along(&self, reference: &TabularPolicy, tokens: &[u32]) -> f64 {
        (0..tokens.len()).map(|i| kl_logits(self.state(tokens, i), reference.state(tokens, i))).sum()
    }

    pub fn add_grad_kl_along(&self, reference: &TabularPolicy, tokens: &[u32], scale: f64, out: &mut PolicyGrad) {
        for i in 0..tokens.len() {
            let slot = if i == 0 {
                &mut out.start[..]
            } else {
                let r = tokens[i - 1] as usize * self.vocab;
                &mut out.trans[r..r + self.vocab]
            };
            kl_logits_grad(self.state(tokens, i), reference.state(tokens, i), scale, slot);
        }
    }

    /// Exact expected number of `target` tokens in a length-`len` rollout.
    pub fn expected_count(&self, target: u32, len: usize) -> f64 {
        let mut marginal = self.start_probs();
        let rows: Vec<Vec<f64>> = (0..self.vocab).map(|r| softmax(self.row(r))).collect();
        let mut total = 0.0;
        for i in 0..len {
            total += marginal[target as usize];
            if i + 1 < len {
                let mut next = vec![0.0; self.vocab];
                for (m, row) in marginal.iter().zip(&rows) {
                    for (n, p) in next.iter_mut().zip(row) {
                        *n += m * p;
                    }
                }
                marginal = next;
            }
        }
        total
    }

    /// `θ ← θ − lr·g`.
    pub fn descend(&mut self, grad: &PolicyGrad, lr: f64) {
        for (t, g) in self.start.iter_mut().zip(&grad.start) {
            *t -= lr * g;
        }
        for (t, g) in self.trans.iter_mut().zip(&grad.trans) {
            *t -= lr * g;
        }
    }
}

/// A sampled group with frozen old-policy log-probabilities and advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGroup {
    pub tokens: Vec<Vec<u32>>,
    pub rewards: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl SampledGroup {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn entries(&self, policy: &TabularPolicy, reference: &TabularPolicy) -> Result<Vec<GroupEntry>> {
        self.tokens
            .iter()
            .zip(&self.rewards)
            .zip(&self.logp_old)
            .map(|((t, &r), &old)| {
                Ok(GroupEntry { reward: r, logp: policy.log_prob(t)?, logp_old: old, kl_to_ref: policy.kl_along(reference, t) })
            })
            .collect()
    }
}

/// Objective value at `policy`, for finite-difference checks.
pub fn grpo_loss(policy: &TabularPolicy, reference: &TabularPolicy, group: &SampledGroup, cfg: &RewardConfig) -> Result<f64> {
    let entries = group.entries(policy, reference)?;
    Ok(reward::grpo_objective(&entries, &group.advantages, cfg)?.loss)
}

/// Analytic gradient of [`grpo_loss`]. Clipped-and-inactive or ratio-clamped
/// terms contribute nothing.
pub fn grpo_gradient(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    group: &SampledGroup,
    cfg: &RewardConfig,
) -> Result<PolicyGrad> {
    if group.advantages.len() != group.len() || group.logp_old.len() != group.len() {
        return Err(Error::DimensionMismatch { expected: group.len(), found: group.advantages.len() });
    }
    if group.is_empty() {
        return Err(Error::GroupTooSmall(0));
    }
    let g = group.len() as f64;
    let mut grad = PolicyGrad::zeros(policy.vocab);
    for ((tokens, &old), &a) in group.tokens.iter().zip(&group.logp_old).zip(&group.advantages) {
        let lp = policy.log_prob(tokens)?;
        if !lp.is_finite() || !old.is_finite() || !a.is_finite() {
            return Err(Error::NonFinite);
        }
        let (rho, clamped) = reward::ratio(lp, old);
        if !clamped && reward::term_is_active(rho, a, cfg.clip_eps) {
            policy.add_grad_log_prob(tokens, -a * rho / g, &mut grad);
        }
        if cfg.beta > 0.0 {
            policy.add_grad_kl_along(reference, tokens, cfg.beta / g, &mut grad);
        }
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(grad)
}

/// Sequence-level reward with an optional refresh hook between iterations.
pub trait RewardModel {
    fn score(&mut self, tokens: &[u32]) -> f64;

    /// Called after each iteration with that iteration's samples.
    fn refresh(&mut self, _iteration: usize, _samples: &[Vec<u32>]) {}
}

/// Number of occurrences of `target`.
#[derive(Debug, Clone, Copy)]
pub struct TargetCount(pub u32);

impl RewardModel for TargetCount {
    fn score(&mut self, tokens: &[u32]) -> f64 {
        tokens.iter().filter(|&&t| t == self.0).count() as f64
    }
}

/// Adapter for plain closures.
pub struct FnReward<F>(pub F);

impl<F: FnMut(&[u32]) -> f64> RewardModel for FnReward<F> {
    fn score(&mut self, tokens: &[u32]) -> f64 {
        (self.0)(tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub group_size: usize,
    pub seq_len: usize,
    pub lr: f64,
    /// Gradient steps per sampled group; the ratio moves away from 1 after the first.
    pub inner_steps: usize,
    pub reward: RewardConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { iterations: 200, group_size: 16, seq_len: 8, lr: 0.1, inner_steps: 1, reward: RewardConfig::default() }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::GroupTooSmall(self.group_size));
        }
        if self.seq_len == 0 {
            return Err(Error::param("seq_len", "must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::param("lr", "must be finite and nonnegative"));
        }
        if self.inner_steps == 0 {
            return Err(Error::param("inner_steps", "must be at least 1"));
        }
        self.reward.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub mean_reward: f64,
    /// Group mean of the exact KL to the reference, before the update.
    pub kl: f64,
    /// Norm of the first gradient of the iteration.
    pub grad_norm: f64,
}

/// Draws a group from `policy` and scores it.
pub fn sample_group(
    policy: &TabularPolicy,
    reward: &mut dyn RewardModel,
    group_size: usize,
    seq_len: usize,
    std_guard: f64,
    rng: &mut dyn RngCore,
) -> Result<SampledGroup> {
    let mut tokens = Vec::with_capacity(group_size);
    let mut logp_old = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let (t, lp) = policy.sample(seq_len, rng);
        tokens.push(t);
        logp_old.push(lp);
    }
    let rewards: Vec<f64> = tokens.iter().map(|t| reward.score(t)).collect();
    let advantages = reward::group_advantages(&rewards, std_guard)?;
    Ok(SampledGroup { tokens, rewards, logp_old, advantages })
}

/// GRPO loop. The old policy is re-synchronized to the current one at the
/// start of every iteration and the reference stays fixed.
///
/// Every iteration samples from the same `(seed, "grpo")` stream, so the
/// history is a deterministic function of the parameter trajectory.
pub fn train(
    policy: &mut TabularPolicy,
    reference: &TabularPolicy,
    reward: &mut dyn RewardModel,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<HistoryRow>> {
    cfg.validate()?;
    let mut history = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let old = policy.clone();
        let mut rng = derive_stream(seed, "grpo");
        let group = sample_group(&old, reward, cfg.group_size, cfg.seq_len, cfg.reward.std_guard, &mut rng)?;
        let kl = group.tokens.iter().map(|t| policy.kl_along(reference, t)).sum::<f64>() / group.len() as f64;
        let mut grad_norm = 0.0;
        for inner in 0..cfg.inner_steps {
            let grad = grpo_gradient(policy, reference, &group, &cfg.reward)?;
            if inner == 0 {
                grad_norm = grad.norm();
            }
            policy.descend(&grad, cfg.lr);
        }
        let mean_reward = group.rewards.iter().sum::<f64>() / group.len() as f64;
        history.push(HistoryRow { iteration, mean_reward, kl, grad_norm });
        reward.refresh(iteration, &group.tokens);
    }
    Ok(history)
}

/// Result of comparing the analytic gradient against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Denominator floor of the relative error, for near-zero components.
pub const FD_REL_FLOOR: f64 = 1e-4;

pub fn finite_difference_check(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    group: &SampledGroup,
    cfg: &RewardConfig,
    h: f64,
) -> Result<FdReport> {
    let analytic = grpo_gradient(policy, reference, group, cfg)?;
    let mut work = policy.clone();
    let mut report = FdReport { max_rel_error: 0.0, max_abs_error: 0.0 };
    let n_start = policy.vocab;
    let total = n_start + policy.vocab * policy.vocab;
    for idx in 0..total {
        let base = param(&work, idx);
        set_param(&mut work, idx, base + h);
        let up = grpo_loss(&work, reference, group, cfg)?;
        set_param(&mut work, idx, base - h);
        let down = grpo_loss(&work, reference, group, cfg)?;
        set_param(&mut work, idx, base);
        let numeric = (up - down) / (2.0 * h);
        let a = if idx < n_start { analytic.start[idx] } else { analytic.trans[idx - n_start] };
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(FD_REL_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        report.max_rel_error = report.max_rel_error.max(rel);
    }
    Ok(report)
}

fn param(p: &TabularPolicy, idx: usize) -> f64 {
    if idx < p.vocab {
        p.start[idx]
    } else {
        p.trans[idx - p.vocab]
    }
}

fn set_param(p: &mut TabularPolicy, idx: usize, v: f64) {
    if idx < p.vocab {
        p.start[idx] = v;
    } else {
        p.trans[idx - p.vocab] = v;
    }
}

/// Smallest distance of any group ratio from a kink of the objective.
pub fn kink_distance(policy: &TabularPolicy, group: &SampledGroup, clip_eps: f64) -> Result<f64> {
    let mut d = f64::INFINITY;
    for (t, &old) in group.tokens.iter().zip(&group.logp_old) {
        let (rho, _) = reward::ratio(policy.log_prob(t)?, old);
        d = d.min((rho - (1.0 + clip_eps)).abs()).min((rho - (1.0 - clip_eps)).abs());
    }
    Ok(d)
}

/// A random finite-difference instance: current policy, reference, and a group
/// sampled from a perturbed old policy, kept away from clip kinks.
pub fn random_fd_instance(
    vocab: usize,
    seq_len: usize,
    group_size: usize,
    cfg: &RewardConfig,
    rng: &mut dyn RngCore,
) -> Result<(TabularPolicy, TabularPolicy, SampledGroup)> {
    loop {
        let policy = TabularPolicy::random(vocab, 1.0, rng)?;
        let reference = TabularPolicy::random(vocab, 1.0, rng)?;
        let mut old = policy.clone();
        for v in old.start.iter_mut().chain(old.trans.iter_mut()) {
            *v += (rng.gen::<f64>() * 2.0 - 1.0) * 0.15;
        }
        let mut noise = FnReward(|t: &[u32]| t.iter().map(|&x| x as f64).sum::<f64>());
        let group = sample_group(&old, &mut noise, group_size, seq_len, cfg.std_guard, rng)?;
        if kink_distance(&policy, &group, cfg.clip_eps)? > 1e-3 {
            return Ok((policy, reference, group));
        }
    }
}
