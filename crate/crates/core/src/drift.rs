//! Stylized drift recurrence: analytic bounds for AR and SWR decoding and a
//! Monte-Carlo realization with uniform per-step noise.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::derive_indexed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParams {
    pub eps: f64,
    pub delta_q: f64,
    pub alpha: f64,
    pub window: usize,
    pub horizon: usize,
}

impl DriftParams {
    pub fn new(eps: f64, delta_q: f64, alpha: f64, window: usize, horizon: usize) -> Result<Self> {
        let p = DriftParams { eps, delta_q, alpha, window, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::param("eps", "must be finite and nonnegative"));
        }
        if !(self.delta_q >= 0.0 && self.delta_q.is_finite()) {
            return Err(Error::param("delta_q", "must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param("alpha", "must lie in [0, 1]"));
        }
        if self.window == 0 {
            return Err(Error::param("W", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::param("T", "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_window(self, window: usize) -> Self {
        DriftParams { window, ..self }
    }

    fn alpha_w(&self) -> f64 {
        libm::pow(self.alpha, self.window as f64)
    }
}

/// `η* = (Wε + δ_q)/(1 − α^W)`.
pub fn eta_fixed_point(p: &DriftParams) -> Result<f64> {
    p.validate()?;
    let aw = p.alpha_w();
    if aw >= 1.0 {
        return Err(Error::UndefinedBound);
    }
    Ok((p.window as f64 * p.eps + p.delta_q) / (1.0 - aw))
}

/// `Wε + η*`, independent of the horizon.
pub fn swr_bound(p: &DriftParams) -> Result<f64> {
    Ok(p.window as f64 * p.eps + eta_fixed_point(p)?)
}

/// `ε(1 − α^T)/(1 − α)`, or `Tε` when `α = 1`.
pub fn ar_bound(p: &DriftParams, horizon: usize) -> Result<f64> {
    p.validate()?;
    if p.alpha >= 1.0 {
        return Ok(horizon as f64 * p.eps);
    }
    Ok(p.eps * (1.0 - libm::pow(p.alpha, horizon as f64)) / (1.0 - p.alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftTrajectory {
    /// Context error at the start of each segment, `η_1 = 0`.
    pub eta: Vec<f64>,
    /// Per-step error at equality, `W` entries per segment.
    pub errors: Vec<f64>,
    /// `None` when `α^W = 1`.
    pub eta_star: Option<f64>,
}

/// Iterates `η_{k+1} = Wε + α^W η_k + δ_q` at equality.
pub fn simulate_recurrence(p: &DriftParams, segments: usize) -> Result<DriftTrajectory> {
    p.validate()?;
    if segments == 0 {
        return Err(Error::param("segments", "must be at least 1"));
    }
    let w = p.window;
    let aw = p.alpha_w();
    let mut eta = Vec::with_capacity(segments);
    let mut errors = Vec::with_capacity(segments * w);
    let mut current = 0.0;
    for _ in 0..segments {
        eta.push(current);
        let mut geometric = 0.0;
        let mut a_j = 1.0;
        for _ in 0..w {
            geometric += a_j;
            a_j *= p.alpha;
            errors.push(p.eps * geometric + a_j * current);
        }
        current = w as f64 * p.eps + aw * current + p.delta_q;
    }
    Ok(DriftTrajectory { eta, errors, eta_star: eta_fixed_point(p).ok() })
}

/// Per-step maxima over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelopes {
    pub ar: Vec<f64>,
    pub swr: Vec<f64>,
}

impl Envelopes {
    pub fn ar_max(&self) -> f64 {
        self.ar.iter().copied().fold(0.0, f64::max)
    }

    pub fn swr_max(&self) -> f64 {
        self.swr.iter().copied().fold(0.0, f64::max)
    }
}

/// One trial of `e_t = α·e_{t−1} + u_t`, `u_t ~ U[0, ε]`.
///
/// AR never resets. SWR carries `e_{kW} + δ_q` into the next segment as its
/// context error. Both processes see the same noise draws.
pub fn simulate_trial(p: &DriftParams, horizon: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let mut ar = Vec::with_capacity(horizon);
    let mut swr = Vec::with_capacity(horizon);
    let (mut e_ar, mut e_swr) = (0.0, 0.0);
    for t in 1..=horizon {
        let u = if p.eps > 0.0 { rng.gen::<f64>() * p.eps } else { 0.0 };
        e_ar = p.alpha * e_ar + u;
        e_swr = p.alpha * e_swr + u;
        ar.push(e_ar);
        swr.push(e_swr);
        if t % p.window == 0 {
            e_swr += p.delta_q;
        }
    }
    (ar, swr)
}

/// Max-over-trials envelopes; trial `i` draws from stream `(seed, "drift", i)`.
pub fn simulate_empirical(p: &DriftParams, horizon: usize, trials: usize, seed: u64) -> Result<Envelopes> {
    p.validate()?;
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let mut env = Envelopes { ar: vec![0.0; horizon], swr: vec![0.0; horizon] };
    for i in 0..trials {
        let mut rng = derive_indexed(seed, "drift", i as u64);
        let (ar, swr) = simulate_trial(p, horizon, &mut rng);
        for (e, v) in env.ar.iter_mut().zip(ar) {
            *e = e.max(v);
        }
        for (e, v) in env.swr.iter_mut().zip(swr) {
            *e = e.max(v);
        }
    }
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub window: usize,
    pub bound: f64,
    pub empirical_max: f64,
    pub eta_star: f64,
}

impl SweepRow {
    pub fn within_bound(&self) -> bool {
        self.empirical_max <= self.bound
    }
}

pub fn sweep_window(p: &DriftParams, windows: &[usize], horizon: usize, trials: usize, seed: u64) -> Result<Vec<SweepRow>> {
    if windows.is_empty() {
        return Err(Error::param("windows", "sweep needs at least one window"));
    }
    windows
        .iter()
        .map(|&w| {
            let q = p.with_window(w);
            let bound = swr_bound(&q)?;
            let env = simulate_empirical(&q, horizon, trials, seed)?;
            Ok(SweepRow { window: w, bound, empirical_max: env.swr_max(), eta_star: eta_fixed_point(&q)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(eps: f64, dq: f64, alpha: f64, w: usize) -> DriftParams {
        DriftParams::new(eps, dq, alpha, w, 100).unwrap()
    }

    #[test]
    fn swr_bound_examples() {
        assert_abs_diff_eq!(swr_bound(&params(0.01, 0.05, 0.0, 6)).unwrap(), 0.17, epsilon = 1e-12);
        assert_eq!(swr_bound(&params(0.0, 0.0, 0.3, 6)).unwrap(), 0.0);
        assert_abs_diff_eq!(swr_bound(&params(0.1, 0.1, 0.5, 2)).unwrap(), 0.6, epsilon = 1e-12);
        assert_eq!(swr_bound(&params(0.1, 0.1, 1.0, 2)), Err(Error::UndefinedBound));
    }

    #[test]
    fn ar_bound_examples() {
        assert_abs_diff_eq!(ar_bound(&params(0.01, 0.0, 1.0, 1), 100).unwrap(), 1.0, epsilon = 1e-12);
        for t in [1, 7, 1000] {
            assert_eq!(ar_bound(&params(0.3, 0.0, 0.0, 1), t).unwrap(), 0.3);
        }
        assert_abs_diff_eq!(ar_bound(&params(0.01, 0.0, 0.5, 1), 200).unwrap(), 0.02, epsilon = 1e-15);
    }

    #[test]
    fn fixed_point_examples() {
        assert_abs_diff_eq!(eta_fixed_point(&params(0.1, 0.1, 0.5, 2)).unwrap(), 0.4, epsilon = 1e-12);
        assert_eq!(eta_fixed_point(&params(0.0, 0.0, 0.5, 2)).unwrap(), 0.0);
        assert_abs_diff_eq!(eta_fixed_point(&params(0.02, 0.05, 0.0, 3)).unwrap(), 0.11, epsilon = 1e-12);
    }

    #[test]
    fn recurrence_memoryless_and_zero() {
        let t = simulate_recurrence(&params(0.02, 0.05, 0.0, 3), 5).unwrap();
        assert_eq!(t.eta[0], 0.0);
        for &e in &t.eta[1..] {
            assert_abs_diff_eq!(e, 0.11, epsilon = 1e-12);
        }
        let z = simulate_recurrence(&params(0.0, 0.0, 0.7, 3), 4).unwrap();
        assert!(z.eta.iter().chain(&z.errors).all(|&v| v == 0.0));
    }

    #[test]
    fn empirical_zero_noise() {
        let env = simulate_empirical(&params(0.0, 0.0, 0.5, 4), 50, 3, 9).unwrap();
        assert!(env.ar.iter().chain(&env.swr).all(|&v| v == 0.0));
    }

    #[test]
    fn sweep_rows() {
        let p = params(0.01, 0.05, 0.3, 1);
        let rows = sweep_window(&p, &[1], 200, 5, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_abs_diff_eq!(rows[0].bound, 0.01 + 0.06 / 0.7, epsilon = 1e-12);
        assert!(sweep_window(&p, &[], 10, 1, 1).is_err());
    }
}
