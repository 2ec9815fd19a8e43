//! Black-box tests of the installed binary: exit codes, determinism and a
//! small end-to-end pipeline over real files.

use eyecontact::imaging::{save_patch, FacePatch};
use eyecontact::selection::{write_detections_jsonl, DetectionBox, FrameDetections};
use eyecontact::synthface::{render_face, SceneParams};
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eyecontact"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {:?} failed with {:?}\nstdout: {}\nstderr: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit, not signal")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

#[test]
fn usage_and_runtime_errors_use_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown subcommand and bad flags are usage errors.
    let out = bin().arg("subsample").output().unwrap();
    assert_eq!(exit_code(&out), 2);
    let out = bin().args(["synth", "--no-such-flag"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);

    // A config file with an unknown key is a configuration error.
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "synth.sessions = 2\nsynth.flavor = mint\n").unwrap();
    let out_dir = dir.path().join("data");
    std::fs::create_dir(&out_dir).unwrap();
    let out = bin()
        .args(["synth", "--out"])
        .arg(&out_dir)
        .args(["--seed", "1", "--n", "20"])
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // A missing output directory is an io error, not a usage error.
    let out = bin()
        .args(["synth", "--out"])
        .arg(dir.path().join("nowhere/data"))
        .args(["--seed", "1", "--n", "20"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3);

    // Garbage in the thread cap is rejected before any work happens.
    let out = bin()
        .env("GC_THREADS", "many")
        .args(["synth", "--out"])
        .arg(&out_dir)
        .args(["--seed", "1", "--n", "20"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);

    // A scores file that does not exist fails with the io code and names
    // the path.
    let out = bin()
        .args(["eval", "--scores"])
        .arg(dir.path().join("missing.csv"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("missing.csv"),
        "the error should name the offending file"
    );
}

#[test]
fn synthesis_is_byte_deterministic_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("synth.cfg");
    std::fs::write(&config, "synth.positive_rate = 0.2\n").unwrap();

    for tag in ["a", "b"] {
        let out_dir = dir.path().join(tag);
        std::fs::create_dir(&out_dir).unwrap();
        run_ok(&[
            "synth",
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "42",
            "--sessions",
            "2",
            "--n",
            "40",
            "--config",
            config.to_str().unwrap(),
        ]);
    }
    for file in ["manifest.csv", "landmarks.csv", "images/s0001_f00007.ppm"] {
        assert_eq!(
            read(&dir.path().join("a").join(file)),
            read(&dir.path().join("b").join(file)),
            "{file} differs between identical seeds"
        );
    }
}

#[test]
fn pipeline_reaches_a_report_and_repeats_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        "synth.positive_rate = 0.3\n\
         picnn.preset = desk_small\n\
         train.iterations = 12\n\
         train.batch_size = 8\n\
         train.log_every = 4\n",
    )
    .unwrap();

    run_ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "11",
        "--sessions",
        "3",
        "--n",
        "120",
        "--config",
        config.to_str().unwrap(),
    ]);
    let manifest = data.join("manifest.csv");

    // Train the same model twice: identical bytes must come out.
    let model_a = dir.path().join("model-a.bin");
    let model_b = dir.path().join("model-b.bin");
    for model in [&model_a, &model_b] {
        run_ok(&[
            "train",
            "--method",
            "picnn",
            "--manifest",
            manifest.to_str().unwrap(),
            "--model-out",
            model.to_str().unwrap(),
            "--seed",
            "3",
            "--config",
            config.to_str().unwrap(),
        ]);
    }
    assert_eq!(read(&model_a), read(&model_b), "training is not deterministic");
    let log = dir.path().join("model-a.bin.log.csv");
    let log_text = String::from_utf8(read(&log)).unwrap();
    assert!(log_text.starts_with("iteration,lr,total_loss,ce_loss,pose_loss\n"));
    assert_eq!(log_text.lines().count(), 1 + 4, "12 iterations logged every 4 plus the first");

    let scores = dir.path().join("scores.csv");
    run_ok(&[
        "predict",
        "--model",
        model_a.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        scores.to_str().unwrap(),
    ]);

    for tag in ["e1", "e2"] {
        let eval_dir = dir.path().join(tag);
        std::fs::create_dir(&eval_dir).unwrap();
        run_ok(&[
            "eval",
            "--scores",
            scores.to_str().unwrap(),
            "--out-dir",
            eval_dir.to_str().unwrap(),
        ]);
    }
    for file in ["report.csv", "pr_curve.csv", "pr_curve.svg"] {
        assert_eq!(
            read(&dir.path().join("e1").join(file)),
            read(&dir.path().join("e2").join(file)),
            "{file} differs between identical evaluations"
        );
    }
    let report = String::from_utf8(read(&dir.path().join("e1/report.csv"))).unwrap();
    assert!(report.starts_with("metric,value\n"));
    for key in ["frames", "positives", "abstentions", "auc_pr", "max_f1", "max_mcc"] {
        assert!(report.contains(&format!("\n{key},")), "report lacks {key}:\n{report}");
    }

    // Summaries and filter images render from the same artifacts.
    let stats_dir = dir.path().join("stats");
    std::fs::create_dir(&stats_dir).unwrap();
    run_ok(&[
        "stats",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out-dir",
        stats_dir.to_str().unwrap(),
    ]);
    assert!(stats_dir.join("summary.csv").exists());
    assert!(stats_dir.join("availability.csv").exists());
    assert!(stats_dir.join("yaw.svg").exists());

    let viz_dir = dir.path().join("viz");
    std::fs::create_dir(&viz_dir).unwrap();
    run_ok(&[
        "viz",
        "--model",
        model_a.to_str().unwrap(),
        "--out-dir",
        viz_dir.to_str().unwrap(),
    ]);
    assert!(viz_dir.join("filters.ppm").exists());
}

#[test]
fn select_follows_the_child_identity_through_a_stream() {
    let dir = tempfile::tempdir().unwrap();
    let frames_dir = dir.path().join("frames");
    std::fs::create_dir(&frames_dir).unwrap();

    let render = |identity: u64, size: usize, noise: u64| {
        let scene = SceneParams {
            yaw: ((noise % 17) as f64) - 8.0,
            pitch: ((noise % 9) as f64) - 4.0,
            roll: 0.0,
            gaze_azimuth: 0.0,
            gaze_elevation: 0.0,
            identity,
            illumination: 1.0,
            occlusion: 0.0,
            noise_seed: noise,
            size,
        };
        render_face(&scene).0.to_gray()
    };

    let mut detections = Vec::new();
    let mut child_boxes = Vec::new();
    for frame_no in 0..40u64 {
        let mut frame = FacePatch::filled(128, 96, 1, 70).unwrap();
        // The child face is rendered bigger and keeps identity 5; the
        // other face keeps identity 9.
        let child_side = 40 + (frame_no as usize % 5);
        let other_side = 24 + (frame_no as usize % 7);
        let (cx, cy) = ((frame_no as usize * 7) % (128 - child_side), 8);
        let (ox, oy) = ((frame_no as usize * 11) % (128 - other_side), 60 - other_side / 2);
        let child_face = render(5, child_side, frame_no);
        let other_face = render(9, other_side, frame_no + 1000);
        for (face, x0, y0) in [(&child_face, cx, cy), (&other_face, ox, oy)] {
            for y in 0..face.height() {
                for x in 0..face.width() {
                    frame.set(x0 + x, y0 + y, 0, face.get(x, y, 0));
                }
            }
        }
        save_patch(&frames_dir.join(format!("f{frame_no:05}.pgm")), &frame).unwrap();
        let child = DetectionBox::new(cx as f64, cy as f64, child_side as f64, child_side as f64, 0.9);
        let other = DetectionBox::new(ox as f64, oy as f64, other_side as f64, other_side as f64, 0.8);
        child_boxes.push(child);
        let boxes =
            if frame_no % 2 == 0 { vec![child, other] } else { vec![other, child] };
        detections.push(FrameDetections { frame: frame_no, boxes });
    }
    let detections_path = dir.path().join("detections.jsonl");
    write_detections_jsonl(&detections_path, &detections).unwrap();

    let out_csv = dir.path().join("child.csv");
    run_ok(&[
        "select",
        "--detections",
        detections_path.to_str().unwrap(),
        "--frames",
        frames_dir.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]);

    let text = String::from_utf8(read(&out_csv)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame,x,y,w,h,score"));
    let mut correct = 0usize;
    let mut total = 0usize;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let frame: usize = fields[0].parse().unwrap();
        let x: f64 = fields[1].parse().unwrap();
        total += 1;
        if (x - child_boxes[frame].x).abs() < 1e-9 {
            correct += 1;
        }
    }
    assert!(total >= 35, "the child should be picked in nearly every frame, got {total}");
    assert!(
        correct as f64 >= 0.9 * total as f64,
        "only {correct} of {total} picks follow the child"
    );
}
