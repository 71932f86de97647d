use tokenworld_core::drift::{
    ar_bound, eta_fixed_point, simulate_empirical, simulate_recurrence, swr_bound, sweep_window, DriftParams,
};
use tokenworld_core::frame::Frame;
use tokenworld_core::metrics::{mse, ssim};
use tokenworld_core::rollout::{
    decode_ar, decode_swr, prompt_length_profile, reencode_count, rollout, DecodeMode, FrameCodec, HistoryPredictor,
    NoClock, OraclePredictor,
};
use tokenworld_core::seed::derive_stream;
use tokenworld_core::sequence::ClipSpec;
use tokenworld_core::world::{move_action_table, Episode, ToyTokenizer, ToyTokenizerConfig, WorldState};

fn desk() -> ToyTokenizer {
    ToyTokenizer::new(ToyTokenizerConfig::desk()).unwrap()
}

fn episode(start: WorldState, t: usize, seed: u64, tok: &ToyTokenizer) -> (Vec<Frame>, Vec<tokenworld_core::action::ActionTokenBlock>) {
    let ep = Episode::random(start, t, &mut derive_stream(seed, "episode"));
    let table = move_action_table(2, 16).unwrap();
    let acts = ep.action_blocks(&table, 2 * tok.codebook_size()).unwrap();
    (ep.frames(), acts)
}

fn small_world() -> WorldState {
    WorldState::new(32, 32, 4, 1, 0.0).unwrap().centered()
}

fn mean_abs(a: &Frame, b: &Frame) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data().len() as f64
}

#[test]
fn reference_prompt_profile() {
    let spec = ClipSpec::reference();
    assert_eq!(prompt_length_profile(&spec, 30, DecodeMode::Ar).unwrap(), (4070, 2721.5));
    let (max, _) = prompt_length_profile(&spec, 30, DecodeMode::Swr { window: 6 }).unwrap();
    assert_eq!(max, 1373 + 5 * 93);
    assert_eq!(reencode_count(30, DecodeMode::Swr { window: 6 }), 4);
    assert_eq!(reencode_count(30, DecodeMode::Ar), 0);
}

#[test]
fn swr_prompt_does_not_grow_with_horizon() {
    let spec = ClipSpec::new(2, 1, 64, 16, 2).unwrap();
    let mode = DecodeMode::Swr { window: 6 };
    let (base, _) = prompt_length_profile(&spec, 6, mode).unwrap();
    for t in [6, 12, 30, 300, 3000] {
        assert_eq!(prompt_length_profile(&spec, t, mode).unwrap().0, base);
    }
    let (ar_short, _) = prompt_length_profile(&spec, 30, DecodeMode::Ar).unwrap();
    let (ar_long, _) = prompt_length_profile(&spec, 300, DecodeMode::Ar).unwrap();
    assert_eq!(ar_long - ar_short, 270 * 18);
}

#[test]
fn traces_agree_with_profile_across_windows() {
    let tok = desk();
    let (frames, acts) = episode(small_world(), 25, 3, &tok);
    let spec = ClipSpec::new(26, 1, 64, 16, 2).unwrap();
    for w in [1, 2, 3, 5, 6, 24, 25, 40] {
        let mode = DecodeMode::Swr { window: w };
        let mut p = OraclePredictor::from_frames(&tok, &frames[1..], 0.05).unwrap();
        let r = rollout(&mut p, &tok, &frames[0], &acts, 25, mode, &mut derive_stream(4, "r"), &NoClock).unwrap();
        let (max, mean) = prompt_length_profile(&spec, 25, mode).unwrap();
        assert_eq!(r.trace.max_prompt_len(), max, "W={w}");
        assert_eq!(r.trace.mean_prompt_len(), mean, "W={w}");
        assert_eq!(r.trace.reencode_count(), reencode_count(25, mode));
        let flagged = r.trace.steps.iter().filter(|s| s.reencode).count();
        assert_eq!(flagged, r.trace.reencode_count());
    }
}

#[test]
fn wide_window_matches_ar_exactly() {
    let tok = desk();
    let (frames, acts) = episode(small_world(), 12, 5, &tok);
    for w in [12, 13, 100] {
        let mut p1 = OraclePredictor::from_frames(&tok, &frames[1..], 0.2).unwrap();
        let mut p2 = OraclePredictor::from_frames(&tok, &frames[1..], 0.2).unwrap();
        let ar = decode_ar(&mut p1, &tok, &frames[0], &acts, 12, &mut derive_stream(6, "r")).unwrap();
        let swr = decode_swr(&mut p2, &tok, &frames[0], &acts, 12, w, &mut derive_stream(6, "r")).unwrap();
        assert_eq!(ar.frames, swr.frames);
        assert_eq!(ar.trace, swr.trace);
    }
}

#[test]
fn lossless_world_decodes_identically() {
    let tok = desk();
    let start = WorldState::new(32, 32, 8, 8, 0.0).unwrap().at(8, 8);
    for seed in 0..10 {
        let (frames, acts) = episode(start, 20, seed, &tok);
        let mut p1 = OraclePredictor::from_frames(&tok, &frames[1..], 0.0).unwrap();
        let mut p2 = OraclePredictor::from_frames(&tok, &frames[1..], 0.0).unwrap();
        let ar = decode_ar(&mut p1, &tok, &frames[0], &acts, 20, &mut derive_stream(seed, "r")).unwrap();
        let swr = decode_swr(&mut p2, &tok, &frames[0], &acts, 20, 6, &mut derive_stream(seed, "r")).unwrap();
        assert_eq!(ar.frames, swr.frames);
        assert_eq!(ar.frames, frames[1..].to_vec());
    }
}

#[test]
fn noiseless_ar_reuses_first_context() {
    let tok = desk();
    let (frames, acts) = episode(small_world(), 8, 9, &tok);
    let mut p = OraclePredictor::from_frames(&tok, &frames[1..], 0.0).unwrap();
    let ar = decode_ar(&mut p, &tok, &frames[0], &acts, 8, &mut derive_stream(0, "r")).unwrap();
    let (ctx0, _) = tok.encode(&frames[0]).unwrap();
    for (t, f) in ar.frames.iter().enumerate() {
        let (_, d) = tok.encode(&frames[t + 1]).unwrap();
        assert_eq!(f, &tok.decode(&ctx0, &d).unwrap());
    }
}

#[test]
fn refreshing_context_improves_long_rollouts() {
    let tok = desk();
    let (mut ar_mse, mut swr_mse, mut ar_ssim, mut swr_ssim) = (0.0, 0.0, 0.0, 0.0);
    let seeds = 50;
    for seed in 0..seeds {
        let (frames, acts) = episode(small_world(), 30, seed, &tok);
        let truth = &frames[1..];
        let mut p1 = HistoryPredictor::from_frames(&tok, &frames, 0.02, 0.1).unwrap();
        let mut p2 = HistoryPredictor::from_frames(&tok, &frames, 0.02, 0.1).unwrap();
        let ar = decode_ar(&mut p1, &tok, &frames[0], &acts, 30, &mut derive_stream(seed, "pred")).unwrap();
        let swr = decode_swr(&mut p2, &tok, &frames[0], &acts, 30, 6, &mut derive_stream(seed, "pred")).unwrap();
        for t in 0..30 {
            ar_mse += mse(&ar.frames[t], &truth[t]).unwrap();
            swr_mse += mse(&swr.frames[t], &truth[t]).unwrap();
            ar_ssim += ssim(&ar.frames[t], &truth[t]).unwrap().mean;
            swr_ssim += ssim(&swr.frames[t], &truth[t]).unwrap().mean;
        }
    }
    assert!(swr_mse < ar_mse, "mse {swr_mse} vs {ar_mse}");
    assert!(swr_ssim > ar_ssim, "ssim {swr_ssim} vs {ar_ssim}");
}

#[test]
fn measured_frame_error_respects_bound() {
    let tok = desk();
    let (p, w, t) = (0.02, 6, 60);
    let mut eps: f64 = 0.0;
    let mut delta_q: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (frames, acts) = episode(small_world(), t, seed, &tok);
        // one step from a clean context
        let mut rng = derive_stream(seed, "eps");
        for k in 1..=t {
            let (ctx, _) = tok.encode(&frames[k - 1]).unwrap();
            let (_, d) = tok.encode(&frames[k]).unwrap();
            let noisy = tokenworld_core::world::oracle_predictor(&d, p, tok.codebook_size(), &mut rng).unwrap();
            eps = eps.max(mean_abs(&tok.decode(&ctx, &noisy).unwrap(), &frames[k]));
        }
        for f in &frames {
            let (c, d) = tok.encode(f).unwrap();
            delta_q = delta_q.max(mean_abs(&tok.decode(&c, &d).unwrap(), f));
        }
        let mut pred = OraclePredictor::from_frames(&tok, &frames[1..], p).unwrap();
        let swr = decode_swr(&mut pred, &tok, &frames[0], &acts, t, w, &mut derive_stream(seed, "swr")).unwrap();
        for (k, f) in swr.frames.iter().enumerate() {
            worst = worst.max(mean_abs(f, &frames[k + 1]));
        }
    }
    let bound = swr_bound(&DriftParams::new(eps, delta_q, 0.0, w, t).unwrap()).unwrap();
    assert!(eps > 0.0 && worst > 0.0);
    assert!(worst <= bound, "worst {worst} bound {bound} (eps {eps}, dq {delta_q})");
}

#[test]
fn empirical_envelope_below_bound() {
    for &alpha in &[0.0, 0.5, 0.9] {
        for &w in &[1, 3, 6, 10] {
            for &(eps, dq) in &[(0.01, 0.0), (0.1, 0.05)] {
                let p = DriftParams::new(eps, dq, alpha, w, 500).unwrap();
                let env = simulate_empirical(&p, 500, 50, 3).unwrap();
                assert!(env.swr_max() <= swr_bound(&p).unwrap(), "α={alpha} W={w} ε={eps}");
            }
        }
    }
    let rows = sweep_window(&DriftParams::new(0.01, 0.05, 0.6, 1, 1000).unwrap(), &[1, 2, 4, 8], 1000, 20, 1).unwrap();
    assert!(rows.iter().all(|r| r.within_bound()));
}

#[test]
fn recurrence_converges_geometrically() {
    for &(alpha, w) in &[(0.5, 1), (0.9, 2), (0.3, 6), (0.99, 4)] {
        let p = DriftParams::new(0.02, 0.01, alpha, w, 100).unwrap();
        let traj = simulate_recurrence(&p, 60).unwrap();
        let star = traj.eta_star.unwrap();
        let aw = f64::powi(alpha, w as i32);
        let gap0 = (traj.eta[0] - star).abs();
        for (k, &eta) in traj.eta.iter().enumerate() {
            assert!((eta - star).abs() <= aw.powi(k as i32) * gap0 + 1e-12);
            assert!(eta <= star + 1e-12);
        }
        assert!(traj.errors.iter().all(|&e| e <= swr_bound(&p).unwrap() + 1e-12));
    }
    let flat = DriftParams::new(0.02, 0.01, 1.0, 3, 100).unwrap();
    assert_eq!(simulate_recurrence(&flat, 5).unwrap().eta_star, None);
}

#[test]
fn swr_envelope_is_horizon_independent() {
    for &(alpha, w) in &[(0.0, 6), (0.6, 4), (0.9, 8)] {
        let p = DriftParams::new(0.01, 0.05, alpha, w, 1000).unwrap();
        let star = eta_fixed_point(&p).unwrap();
        let short = simulate_empirical(&p, 1000, 50, 7).unwrap().swr_max();
        let long = simulate_empirical(&DriftParams { horizon: 10_000, ..p }, 10_000, 50, 7).unwrap().swr_max();
        assert!((long - short).abs() <= 0.01 * star, "α={alpha} W={w}: {short} vs {long}");
    }
}

#[test]
fn unit_carry_grows_linearly() {
    for &eps in &[0.01, 0.1] {
        let p = DriftParams::new(eps, 0.0, 1.0, 6, 1000).unwrap();
        let env = simulate_empirical(&p, 1000, 20, 5).unwrap();
        assert!(env.ar[999] >= 0.4 * eps * 1000.0);
        assert!(env.ar[999] <= ar_bound(&p, 1000).unwrap());
        let mid = env.ar[499];
        assert!(env.ar[999] > 1.6 * mid);
    }
}
