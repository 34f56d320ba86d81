use std::path::Path;
use std::process::{Command, Output};

fn scoreflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scoreflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("run.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(scoreflow(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(scoreflow(&[]).status.code(), Some(1));
    let bad_flag = scoreflow(&[
        "schedule-dump",
        "--kind",
        "ddpm",
        "--bogus",
        "--out-dir",
        "x",
    ]);
    assert_eq!(bad_flag.status.code(), Some(1));
    assert!(!bad_flag.stderr.is_empty());
    assert_eq!(scoreflow(&["--help"]).status.code(), Some(0));
    assert_eq!(scoreflow(&["--version"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = scoreflow(&[
        "train",
        "--data",
        path(&missing),
        "--loss",
        "dsm-ve",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn schedule_dump_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, steps) in [("ddpm", "1000"), ("ve", "250")] {
        let out_dir = dir.path().join(kind);
        let out = scoreflow(&[
            "schedule-dump",
            "--kind",
            kind,
            "--T",
            steps,
            "--out-dir",
            path(&out_dir),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let csv = std::fs::read_to_string(out_dir.join("schedule.csv")).unwrap();
        assert_eq!(csv.lines().count(), steps.parse::<usize>().unwrap() + 1);
        let m = manifest(&out_dir);
        assert_eq!(m["subcommand"], "schedule-dump");
        assert_eq!(m["tool"], "scoreflow");
        assert!(m["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    }
    let ddpm = std::fs::read_to_string(dir.path().join("ddpm/schedule.csv")).unwrap();
    let last: Vec<f64> = ddpm
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 1000.0);
    assert!((last[3] - 4.0358297653756833e-5).abs() < 1e-12);
}

#[test]
fn bench_reports_every_method_with_ode_fastest() {
    let dir = tempfile::tempdir().unwrap();
    let out = scoreflow(&[
        "bench",
        "--task",
        "oracle2d",
        "--methods",
        "ddpm,em,pc,ode",
        "--n",
        "2000",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let secs = |m: &str| -> f64 { rows.iter().find(|r| r[0] == m).unwrap()[1].parse().unwrap() };
    let evals = |m: &str| -> usize { rows.iter().find(|r| r[0] == m).unwrap()[2].parse().unwrap() };
    assert!(["ddpm", "em", "pc"].iter().all(|m| secs("ode") < secs(m)));
    assert_eq!(evals("ddpm"), 1000);
    assert_eq!(evals("em"), 1000);
    assert_eq!(evals("pc"), 1000);
    assert!(evals("ode") < 1000);
}

#[test]
fn gen_data_is_reproducible_and_uses_documented_names() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = scoreflow(&[
            "gen-data",
            "--kind",
            "phantom",
            "--n",
            "2",
            "--size",
            "16",
            "--seed",
            "5",
            "--out-dir",
            path(out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in [
        "pair_0000_mr.pgm",
        "pair_0000_ct.pgm",
        "pair_0001_mr.pgm",
        "pair_0001_ct.pgm",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap()
        );
    }
    assert_eq!(manifest(&a)["seed"], 5);

    let points = dir.path().join("points");
    let out = scoreflow(&[
        "gen-data",
        "--kind",
        "gmm2d",
        "--n",
        "10",
        "--out-dir",
        path(&points),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(points.join("points.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x0,x1,y"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn eval_writes_metrics_for_matching_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    scoreflow(&[
        "gen-data",
        "--kind",
        "phantom",
        "--n",
        "1",
        "--size",
        "16",
        "--out-dir",
        path(&data),
    ]);
    let out_dir = dir.path().join("eval");
    let out = scoreflow(&[
        "eval",
        "--a",
        path(&data.join("pair_0000_ct.pgm")),
        "--b",
        path(&data.join("pair_0000_ct.pgm")),
        "--out-dir",
        path(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "name,ssim,psnr");
    assert_eq!(lines[1], "pair_0000_ct.pgm,1.00000000e0,9.90000000e1");
}

#[test]
fn train_sample_and_mc_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model_dir = dir.path().join("model");
    scoreflow(&[
        "gen-data",
        "--kind",
        "gmm2d",
        "--n",
        "200",
        "--seed",
        "1",
        "--out-dir",
        path(&data),
    ]);
    let out = scoreflow(&[
        "train",
        "--data",
        path(&data.join("points.csv")),
        "--loss",
        "dsm-ve",
        "--hidden",
        "16,16",
        "--batch-size",
        "50",
        "--min-epochs",
        "3",
        "--max-epochs",
        "3",
        "--out-dir",
        path(&model_dir),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.lines().any(|l| l.starts_with("epoch 3 loss ")));
    let curve = std::fs::read_to_string(model_dir.join("loss_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    let model = model_dir.join("model.ckpt");

    let sample = |out_dir: &Path, seed: &str| {
        let out = scoreflow(&[
            "sample",
            "--model",
            path(&model),
            "--method",
            "em",
            "--steps",
            "40",
            "--label",
            "1",
            "--n",
            "5",
            "--seed",
            seed,
            "--dump-every",
            "20",
            "--out-dir",
            path(out_dir),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stderr).contains("step "));
        std::fs::read_to_string(out_dir.join("samples.csv")).unwrap()
    };
    let first = sample(&dir.path().join("s1"), "3");
    assert_eq!(first, sample(&dir.path().join("s2"), "3"));
    assert_ne!(first, sample(&dir.path().join("s3"), "4"));
    assert_eq!(first.lines().count(), 6);
    for frame in ["frame_0000.csv", "frame_0020.csv", "frame_0040.csv"] {
        assert!(dir.path().join("s1").join(frame).exists(), "{frame}");
    }

    let wrong = scoreflow(&[
        "sample",
        "--model",
        path(&model),
        "--method",
        "ddpm",
        "--label",
        "0",
        "--out-dir",
        path(&dir.path().join("s4")),
    ]);
    assert_eq!(wrong.status.code(), Some(2));

    let mc_dir = dir.path().join("mc");
    let out = scoreflow(&[
        "mc",
        "--model",
        path(&model),
        "--method",
        "ode",
        "--label",
        "0",
        "--K",
        "4",
        "--out-dir",
        path(&mc_dir),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = std::fs::read_to_string(mc_dir.join("uncertainty.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "method,K,mean_uncertainty,seconds_per_sample");
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&fields[..2], ["ode", "4"]);
    assert!(fields[2].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn mc_on_images_writes_mean_std_and_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model_dir = dir.path().join("model");
    scoreflow(&[
        "gen-data",
        "--kind",
        "phantom",
        "--n",
        "4",
        "--size",
        "16",
        "--out-dir",
        path(&data),
    ]);
    let out = scoreflow(&[
        "train",
        "--data",
        path(&data),
        "--loss",
        "ddpm",
        "--hidden",
        "16",
        "--min-epochs",
        "2",
        "--max-epochs",
        "2",
        "--out-dir",
        path(&model_dir),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mc_dir = dir.path().join("mc");
    let out = scoreflow(&[
        "mc",
        "--model",
        path(&model_dir.join("model.ckpt")),
        "--method",
        "ddpm",
        "--cond",
        path(&data.join("pair_0000_mr.pgm")),
        "--K",
        "3",
        "--batched",
        "--out-dir",
        path(&mc_dir),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "mean.pgm",
        "std.pgm",
        "replicate_0.pgm",
        "replicate_2.pgm",
        "uncertainty.csv",
        "run.json",
    ] {
        assert!(mc_dir.join(name).exists(), "{name}");
    }
    assert_eq!(manifest(&mc_dir)["flags"]["batched"], true);
}
