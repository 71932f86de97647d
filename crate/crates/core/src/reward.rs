//! Rubric normalization, composite reward, Huber distillation and the clipped
//! group-relative policy objective.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DIMS: usize = 6;

/// Rubric maxima per dimension.
pub const SCORE_MAX: [f64; DIMS] = [3.0, 2.0, 1.0, 1.0, 1.0, 2.0];

pub type Scores = [f64; DIMS];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub weights: Scores,
    pub lambdas: Scores,
    pub huber_delta: f64,
    pub clip_eps: f64,
    pub beta: f64,
    pub std_guard: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            weights: [1.0 / 6.0; DIMS],
            lambdas: [1.0; DIMS],
            huber_delta: 0.5,
            clip_eps: 0.2,
            beta: 0.01,
            std_guard: 1e-8,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param("weights", "must be finite and nonnegative"));
        }
        if self.lambdas.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param("lambdas", "must be finite and nonnegative"));
        }
        if !(self.huber_delta > 0.0 && self.huber_delta.is_finite()) {
            return Err(Error::param("huber_delta", "must be positive"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::param("clip_eps", "must lie in (0, 1)"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", "must be finite and nonnegative"));
        }
        if !(self.std_guard >= 0.0 && self.std_guard.is_finite()) {
            return Err(Error::param("std_guard", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// `s̃_k = r_k / r_k^max`.
pub fn normalize_scores(raw: &Scores) -> Result<Scores> {
    let mut out = [0.0; DIMS];
    for (k, (&r, &m)) in raw.iter().zip(&SCORE_MAX).enumerate() {
        if !r.is_finite() {
            return Err(Error::NonFinite);
        }
        if !(0.0..=m).contains(&r) {
            return Err(Error::InvalidRange(alloc::format!("score {k} = {r} outside [0, {m}]")));
        }
        out[k] = r / m;
    }
    Ok(out)
}

pub fn composite_reward(s: &Scores, weights: &Scores) -> f64 {
    s.iter().zip(weights).map(|(a, b)| a * b).sum()
}

pub fn huber(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// `dHuber/dr`.
pub fn huber_grad(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// `Σ_k λ_k Huber_δ(student_k − teacher_k)`.
pub fn distill_loss(student: &Scores, teacher: &Scores, lambdas: &Scores, delta: f64) -> f64 {
    student
        .iter()
        .zip(teacher)
        .zip(lambdas)
        .map(|((s, t), l)| l * huber(s - t, delta))
        .sum()
}

/// `(R − mean)/std` with the population std; all zeros when `std ≤ guard`.
pub fn group_advantages(rewards: &[f64], std_guard: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    if std <= std_guard {
        return Ok(alloc::vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Log-ratios are clamped to `[-20, 20]` before exponentiation.
pub const LOG_RATIO_CLAMP: f64 = 20.0;

/// `exp(logp − logp_old)`, and whether the clamp fired.
pub fn ratio(logp: f64, logp_old: f64) -> (f64, bool) {
    let d = logp - logp_old;
    let c = d.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP);
    (libm::exp(c), c != d)
}

/// `min(ρA, clip(ρ, 1−ε, 1+ε)A)`.
pub fn clipped_term(rho: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = rho.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (rho * advantage).min(clipped * advantage)
}

/// True when the unclipped branch is the active one, i.e. the term depends on ρ.
pub fn term_is_active(rho: f64, advantage: f64, clip_eps: f64) -> bool {
    if advantage > 0.0 {
        rho <= 1.0 + clip_eps
    } else if advantage < 0.0 {
        rho >= 1.0 - clip_eps
    } else {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEntry {
    pub reward: f64,
    /// Sequence log-probability under the current policy.
    pub logp: f64,
    /// Under the old-policy snapshot that sampled the rollout.
    pub logp_old: f64,
    /// Exact KL to the frozen reference along this rollout's prefixes.
    pub kl_to_ref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    pub terms: Vec<f64>,
    pub kl: f64,
}

/// `−(1/G) Σ min(ρA, clip(ρ)A) + β·KL`, with KL averaged over the group.
pub fn grpo_objective(group: &[GroupEntry], advantages: &[f64], cfg: &RewardConfig) -> Result<Objective> {
    if group.len() != advantages.len() {
        return Err(Error::DimensionMismatch { expected: group.len(), found: advantages.len() });
    }
    if group.is_empty() {
        return Err(Error::GroupTooSmall(0));
    }
    let g = group.len() as f64;
    let mut terms = Vec::with_capacity(group.len());
    let mut kl = 0.0;
    for (e, &a) in group.iter().zip(advantages) {
        if !e.logp.is_finite() || !e.logp_old.is_finite() || !e.kl_to_ref.is_finite() || !a.is_finite() {
            return Err(Error::NonFinite);
        }
        let (rho, _) = ratio(e.logp, e.logp_old);
        terms.push(clipped_term(rho, a, cfg.clip_eps));
        kl += e.kl_to_ref;
    }
    kl /= g;
    let loss = -terms.iter().sum::<f64>() / g + cfg.beta * kl;
    Ok(Objective { loss, terms, kl })
}

/// Linear scorer `s = clamp(Wx + b, 0, 1)` regressed on teacher scores with the
/// weighted Huber loss. Stands in for the lightweight student reward model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStudent {
    pub weights: Vec<Scores>,
    pub bias: Scores,
}

impl LinearStudent {
    pub fn zeros(features: usize) -> Self {
        LinearStudent { weights: alloc::vec![[0.0; DIMS]; features], bias: [0.0; DIMS] }
    }

    pub fn features(&self) -> usize {
        self.weights.len()
    }

    pub fn raw(&self, x: &[f64]) -> Scores {
        let mut out = self.bias;
        for (xi, w) in x.iter().zip(&self.weights) {
            for k in 0..DIMS {
                out[k] += xi * w[k];
            }
        }
        out
    }

    pub fn score(&self, x: &[f64]) -> Scores {
        self.raw(x).map(|v| v.clamp(0.0, 1.0))
    }

    /// Mean distillation loss of the unclamped outputs.
    pub fn loss(&self, data: &[(Vec<f64>, Scores)], cfg: &RewardConfig) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        data.iter().map(|(x, t)| distill_loss(&self.raw(x), t, &cfg.lambdas, cfg.huber_delta)).sum::<f64>()
            / data.len() as f64
    }

    /// Full-batch gradient descent on [`LinearStudent::loss`].
    pub fn fit(&mut self, data: &[(Vec<f64>, Scores)], cfg: &RewardConfig, lr: f64, epochs: usize) -> Result<()> {
        for (x, _) in data {
            if x.len() != self.features() {
                return Err(Error::DimensionMismatch { expected: self.features(), found: x.len() });
            }
        }
        if data.is_empty() {
            return Ok(());
        }
        let n = data.len() as f64;
        for _ in 0..epochs {
            let mut gw = alloc::vec![[0.0; DIMS]; self.features()];
            let mut gb = [0.0; DIMS];
            for (x, t) in data {
                let s = self.raw(x);
                for k in 0..DIMS {
                    let g = cfg.lambdas[k] * huber_grad(s[k] - t[k], cfg.huber_delta) / n;
                    gb[k] += g;
                    for (gwi, xi) in gw.iter_mut().zip(x) {
                        gwi[k] += g * xi;
                    }
                }
            }
            for k in 0..DIMS {
                self.bias[k] -= lr * gb[k];
                for (w, g) in self.weights.iter_mut().zip(&gw) {
                    w[k] -= lr * g[k];
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_scores(&SCORE_MAX).unwrap(), [1.0; 6]);
        assert_eq!(normalize_scores(&[0.0; 6]).unwrap(), [0.0; 6]);
        assert_eq!(normalize_scores(&[1.5, 1.0, 0.5, 0.5, 0.5, 1.0]).unwrap(), [0.5; 6]);
        assert!(normalize_scores(&[3.5, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(normalize_scores(&[-0.1, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn composite_examples() {
        assert_abs_diff_eq!(composite_reward(&[1.0; 6], &[1.0 / 6.0; 6]), 1.0, epsilon = 1e-15);
        assert_eq!(composite_reward(&[0.0; 6], &[1.0 / 6.0; 6]), 0.0);
        assert_eq!(composite_reward(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0], &[1.0; 6]), 3.0);
    }

    #[test]
    fn distill_examples() {
        let l = [1.0; 6];
        let t = [0.3, 0.1, 0.9, 0.0, 0.5, 1.0];
        assert_eq!(distill_loss(&t, &t, &l, 0.5), 0.0);
        let mut s = [0.0; 6];
        s[0] = 0.2;
        assert_abs_diff_eq!(distill_loss(&s, &[0.0; 6], &l, 0.5), 0.02, epsilon = 1e-15);
        s[0] = 1.0;
        assert_abs_diff_eq!(distill_loss(&s, &[0.0; 6], &l, 0.5), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn advantage_examples() {
        let a = group_advantages(&[1.0, 2.0, 3.0], 1e-8).unwrap();
        assert_abs_diff_eq!(a[0], -1.224744871391589, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[2], 1.224744871391589, epsilon = 1e-12);
        assert_eq!(group_advantages(&[2.0, 2.0, 2.0], 1e-8).unwrap(), [0.0; 3]);
        assert_eq!(group_advantages(&[0.0, 1.0], 1e-8).unwrap(), [-1.0, 1.0]);
        assert_eq!(group_advantages(&[1.0], 1e-8), Err(Error::GroupTooSmall(1)));
    }

    #[test]
    fn clip_examples() {
        assert_abs_diff_eq!(clipped_term(1.5, 1.0, 0.2), 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(clipped_term(0.5, -1.0, 0.2), -0.8, epsilon = 1e-15);
        assert!(!term_is_active(1.5, 1.0, 0.2));
        assert!(!term_is_active(0.5, -1.0, 0.2));
        assert!(term_is_active(0.5, 1.0, 0.2));
    }

    #[test]
    fn objective_at_unit_ratio() {
        let adv = group_advantages(&[1.0, 4.0, 2.0, 0.5], 1e-8).unwrap();
        let group: Vec<_> = adv
            .iter()
            .map(|_| GroupEntry { reward: 0.0, logp: -3.0, logp_old: -3.0, kl_to_ref: 0.0 })
            .collect();
        let cfg = RewardConfig { beta: 0.0, ..RewardConfig::default() };
        let obj = grpo_objective(&group, &adv, &cfg).unwrap();
        assert_abs_diff_eq!(obj.loss, 0.0, epsilon = 1e-15);
        let bad = [GroupEntry { reward: 0.0, logp: f64::NAN, logp_old: 0.0, kl_to_ref: 0.0 }; 2];
        assert_eq!(grpo_objective(&bad, &[0.0, 0.0], &cfg), Err(Error::NonFinite));
    }

    #[test]
    fn ratio_clamps() {
        let (r, clamped) = ratio(100.0, 0.0);
        assert!(clamped);
        assert_abs_diff_eq!(r, libm::exp(20.0), epsilon = 1e-3);
        assert_eq!(ratio(-1.0, -1.0), (1.0, false));
    }

    #[test]
    fn student_fit_reduces_loss() {
        let cfg = RewardConfig::default();
        let data: Vec<(Vec<f64>, Scores)> = (0..20)
            .map(|i| {
                let x = i as f64 / 20.0;
                (alloc::vec![x], [x, 1.0 - x, 0.5, x * 0.5, 0.2, 0.9])
            })
            .collect();
        let mut s = LinearStudent::zeros(1);
        let before = s.loss(&data, &cfg);
        s.fit(&data, &cfg, 0.5, 500).unwrap();
        assert!(s.loss(&data, &cfg) < 0.1 * before);
    }
}
