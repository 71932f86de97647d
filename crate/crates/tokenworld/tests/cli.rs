use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tokenworld::io::write_frames;
use tokenworld_core::world::{Episode, Move, WorldState};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokenworld")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn fsq_selftest_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let o = bin(&["fsq-selftest", "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("K=4375"));
    let rows = csv_rows(&t.path().join("fsq_selftest.csv"));
    assert_eq!(rows[0], ["seed", "levels", "codebook_size", "dims", "failures", "first_failure"]);
    assert_eq!(rows[1][2], "4375");
    assert_eq!(code(&bin(&["fsq-selftest", "--levels", "2", "--out", &out_arg(t.path())])), 0);
    let o = bin(&["fsq-selftest", "--levels", "1", "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&bin(&["no-such-command"])), 2);
}

#[test]
fn rollout_reference_prompt_lengths() {
    let t = tempfile::tempdir().unwrap();
    let o = bin(&["rollout", "--tokenizer", "reference", "--window", "6", "--horizon", "30", "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let max = |name: &str| {
        csv_rows(&t.path().join(name))[1..].iter().map(|r| r[2].parse::<usize>().unwrap()).max().unwrap()
    };
    assert_eq!(max("trace_ar.csv"), 4070);
    assert_eq!(max("trace_swr.csv"), 1838);
    let flags: usize =
        csv_rows(&t.path().join("trace_swr.csv"))[1..].iter().map(|r| r[3].parse::<usize>().unwrap()).sum();
    assert_eq!(flags, 4);
    assert!(t.path().join("timings.csv").exists());
    assert!(t.path().join("config.json").exists());
    assert!(t.path().join("frames/swr/frame_0030.pgm").exists());
}

#[test]
fn rollout_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(code(&bin(&["rollout", "--seed", "5", "--out", &out_arg(d.path())])), 0);
    }
    for name in ["trace_ar.csv", "trace_swr.csv", "comparison.csv", "frames/swr/frame_0017.pgm"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    bin(&["rollout", "--seed", "6", "--out", &out_arg(c.path())]);
    assert_ne!(fs::read(a.path().join("comparison.csv")).unwrap(), fs::read(c.path().join("comparison.csv")).unwrap());
}

#[test]
fn lossless_world_frames_identical() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("cfg.json");
    fs::write(&cfg, r#"{"world": {"extent": 8, "cell": 8, "start": [8, 16], "corruption": 0.0}}"#).unwrap();
    let o = bin(&["rollout", "--config", cfg.to_str().unwrap(), "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 0);
    for i in 1..=30 {
        let name = format!("frame_{i:04}.pgm");
        let ar = fs::read(t.path().join("frames/ar").join(&name)).unwrap();
        assert_eq!(ar, fs::read(t.path().join("frames/swr").join(&name)).unwrap());
        assert_eq!(ar, fs::read(t.path().join("frames/truth").join(&name)).unwrap());
    }
}

#[test]
fn single_segment_swr_equals_ar() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(&["rollout", "--window", "30", "--out", &out_arg(t.path())])), 0);
    let ar = fs::read_to_string(t.path().join("trace_ar.csv")).unwrap();
    assert_eq!(ar, fs::read_to_string(t.path().join("trace_swr.csv")).unwrap());
}

#[test]
fn drift_sweep_alpha_zero_bound_column() {
    let t = tempfile::tempdir().unwrap();
    let o = bin(&[
        "drift-sweep", "--alpha", "0", "--eps", "0.01", "--delta-q", "0.05", "--window-list", "1,2,4,6,8,16",
        "--horizon", "500", "--trials", "20", "--seed", "3", "--out", &out_arg(t.path()),
    ]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&t.path().join("drift_sweep.csv"));
    assert_eq!(rows[0], ["seed", "W", "bound", "empirical_max", "eta_star"]);
    for r in &rows[1..] {
        assert_eq!(r[0], "3");
        let w: f64 = r[1].parse().unwrap();
        let bound: f64 = r[2].parse().unwrap();
        assert!((bound - (2.0 * w * 0.01 + 0.05)).abs() <= 1e-12);
        assert!(r[3].parse::<f64>().unwrap() <= bound);
    }
    assert_eq!(code(&bin(&["drift-sweep", "--alpha", "1", "--out", &out_arg(t.path())])), 2);
    assert_eq!(code(&bin(&["drift-sweep", "--window-list", "3,x", "--out", &out_arg(t.path())])), 2);
}

#[test]
fn drift_sweep_zero_noise_table() {
    let t = tempfile::tempdir().unwrap();
    let o = bin(&["drift-sweep", "--eps", "0", "--delta-q", "0", "--trials", "3", "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 0);
    for r in &csv_rows(&t.path().join("drift_sweep.csv"))[1..] {
        assert!(r[2..].iter().all(|v| v == "0"), "{r:?}");
    }
}

#[test]
fn grpo_train_outputs() {
    let t = tempfile::tempdir().unwrap();
    let o = bin(&["grpo-train", "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("rising"), "{stdout}");
    let rows = csv_rows(&t.path().join("grpo_history.csv"));
    assert_eq!(rows[0], ["seed", "iteration", "mean_reward", "kl", "grad_norm"]);
    assert_eq!(rows.len(), 201);
    let dump: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("policy.json")).unwrap()).unwrap();
    assert_eq!(dump["start_logits"].as_array().unwrap().len(), 5);

    let z = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(&["grpo-train", "--iters", "0", "--out", &out_arg(z.path())])), 0);
    assert_eq!(fs::read_to_string(z.path().join("grpo_history.csv")).unwrap(), "seed,iteration,mean_reward,kl,grad_norm\n");

    let o = bin(&["grpo-train", "--group-size", "1", "--out", &out_arg(z.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.group_size"));
}

fn write_clip(dir: &Path, moves: Vec<Move>) {
    let start = WorldState::new(32, 32, 4, 2, 0.0).unwrap().at(8, 4);
    write_frames(dir, &Episode::run(start, moves).frames()).unwrap();
}

#[test]
fn metrics_identical_and_moving() {
    let t = tempfile::tempdir().unwrap();
    let clip = t.path().join("clip");
    write_clip(&clip, vec![Move::Right; 8]);
    let out = t.path().join("m");
    let o = bin(&["metrics", clip.to_str().unwrap(), clip.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&out.join("metrics.csv"));
    assert_eq!(rows[0], ["seed", "frame_index", "mse", "psnr", "ssim", "roi_mse", "roi_psnr", "roi_ssim", "coverage"]);
    assert_eq!(rows.len(), 1 + 9 + 1);
    for r in &rows[1..] {
        assert_eq!((r[2].as_str(), r[4].as_str()), ("0", "1"));
        let cov: f64 = r[8].parse().unwrap();
        assert!(cov > 0.0 && cov < 1.0);
    }
}

#[test]
fn metrics_static_clip_requires_roi() {
    let t = tempfile::tempdir().unwrap();
    let clip = t.path().join("still");
    write_clip(&clip, vec![Move::Stay; 5]);
    let out = t.path().join("m");
    let args = ["metrics", clip.to_str().unwrap(), clip.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(code(&bin(&args)), 0);
    let mut strict = args.to_vec();
    strict.push("--roi-required");
    let o = bin(&strict);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("empty ROI"));
}

#[test]
fn metrics_mismatched_clips() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    write_clip(&a, vec![Move::Right; 4]);
    write_clip(&b, vec![Move::Right; 3]);
    let o = bin(&["metrics", a.to_str().unwrap(), b.to_str().unwrap(), "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_errors_exit_two() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("bad.json");
    fs::write(&cfg, "{\n  \"decode\": {\n    \"W\": 0\n  }\n}\n").unwrap();
    let o = bin(&["rollout", "--config", cfg.to_str().unwrap(), "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("decode.W"));

    fs::write(&cfg, "{\n  \"seed\": 1,\n  \"decode\": {\"W\" 3}\n}\n").unwrap();
    let o = bin(&["rollout", "--config", cfg.to_str().unwrap(), "--out", &out_arg(t.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn echo_records_effective_config() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(&["drift-sweep", "--alpha", "0.3", "--trials", "2", "--seed", "11", "--out", &out_arg(t.path())])), 0);
    let echo = tokenworld::config::load_config(&t.path().join("config.json")).unwrap();
    assert_eq!(echo.drift.alpha, 0.3);
    assert_eq!(echo.seed, 11);
    assert_eq!(echo.clip.frames, 8);
}
