use std::path::Path;
use std::process::{Command, Output};

fn gapfill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapfill"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_generate_and_oracle_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let (imgs, data, run) = (tmp.path().join("imgs"), tmp.path().join("data"), tmp.path().join("run"));
    ok(&gapfill(&["synth", "--out", s(&imgs), "--count", "2", "--width", "128", "--height", "96", "--seed", "3"]));
    ok(&gapfill(&["generate", "--images", s(&imgs), "--out", s(&data), "--piece-size", "32", "--erosion", "0.07", "--seed", "3"]));
    assert!(data.join("bundles/img_000/manifest.json").is_file());
    assert!(data.join("solutions/img_001.json").is_file());

    let out = gapfill(&[
        "pipeline",
        "--bundles",
        s(&data.join("bundles")),
        "--solutions",
        s(&data.join("solutions")),
        "--scorer",
        "oracle",
        "--out",
        s(&run),
        "--threads",
        "1",
    ]);
    ok(&out);
    let report = std::fs::read_to_string(run.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().filter(|l| l.starts_with("img_")).collect();
    assert_eq!(rows.len(), 2, "{report}");
    for r in rows {
        assert!(r.contains(",1,1,true") || r.contains(",1.0,1.0,true") || r.ends_with("true"), "{r}");
    }
    assert!(run.join("boards/img_000.txt").is_file());
    assert!(run.join("tensors/img_000.csv").is_file());

    // same pieces through the individual commands
    let bundle = data.join("bundles/img_000");
    let tensor = run.join("single.csv");
    let board = run.join("single/img_000.txt");
    ok(&gapfill(&["score", "--bundle", s(&bundle), "--scorer", "baseline", "--out", s(&tensor)]));
    ok(&gapfill(&["solve", "--tensor", s(&tensor), "--bundle", s(&bundle), "--out", s(&board)]));
    let text = std::fs::read_to_string(&board).unwrap();
    assert!(text.contains("# scorer: baseline"));
    let eval = gapfill(&["evaluate", "--boards", s(&run.join("single")), "--solutions", s(&data.join("solutions"))]);
    ok(&eval);
    assert!(String::from_utf8_lossy(&eval.stdout).contains("img_000"));
    ok(&gapfill(&["render", "--board", s(&board), "--bundle", s(&bundle), "--out", s(&run.join("img.png"))]));
    assert_eq!(image::open(run.join("img.png")).unwrap().width(), 128);
}

#[test]
fn missing_tensor_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let board = tmp.path().join("board.txt");
    let out = gapfill(&["solve", "--tensor", s(&tmp.path().join("nope.csv")), "--rows", "2", "--cols", "2", "--out", s(&board)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
    assert!(!board.exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    assert_eq!(gapfill(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(gapfill(&["fly"]).status.code(), Some(2));
    let out = gapfill(&["score", "--bundle", "/nonexistent", "--scorer", "oracle", "--out", "/tmp/x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let imgs = tmp.path().join("imgs");
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "count = 1\nwidth = 64\nheight = 32\n").unwrap();
    ok(&gapfill(&["synth", "--config", s(&cfg), "--out", s(&imgs)]));
    let img = image::open(imgs.join("img_000.png")).unwrap();
    assert_eq!((img.width(), img.height()), (64, 32));
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert!(!gapfill(&["synth", "--config", s(&cfg), "--out", s(&imgs)]).status.success());
}

#[test]
fn tiny_training_run_feeds_the_neural_scorer() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |p: &str| tmp.path().join(p);
    ok(&gapfill(&["synth", "--out", s(&t("c1")), "--count", "2", "--width", "192", "--height", "128", "--seed", "1"]));
    ok(&gapfill(&["synth", "--out", s(&t("c2")), "--count", "2", "--width", "192", "--height", "128", "--seed", "50"]));
    ok(&gapfill(&[
        "train-inpaint", "--corpus", s(&t("c1")), "--phase2-corpus", s(&t("c2")), "--out", s(&t("m1")),
        "--epochs", "1", "--pairs", "2", "--width-divisor", "32",
    ]));
    assert!(t("m1/phase1.ckpt").is_file());
    assert!(t("m1/phase1_epoch001.ckpt").is_file());
    assert!(std::fs::read_to_string(t("m1/phase1_loss.csv")).unwrap().contains("g_l1"));

    // the same corpus for both phases is refused
    assert!(!gapfill(&[
        "train-classify", "--corpus", s(&t("c1")), "--phase1-corpus", s(&t("c1")), "--init", s(&t("m1/phase1.ckpt")),
        "--out", s(&t("bad")), "--epochs", "1", "--pairs", "2",
    ])
    .status
    .success());

    ok(&gapfill(&[
        "train-classify", "--corpus", s(&t("c2")), "--phase1-corpus", s(&t("c1")), "--init", s(&t("m1/phase1.ckpt")),
        "--out", s(&t("m2")), "--epochs", "1", "--pairs", "2",
    ]));
    let ckpt = t("m2/phase2.ckpt");
    assert!(ckpt.is_file());

    ok(&gapfill(&["generate", "--images", s(&t("c2")), "--out", s(&t("d7")), "--erosion", "0.07"]));
    ok(&gapfill(&["generate", "--images", s(&t("c2")), "--out", s(&t("d14")), "--erosion", "0.14"]));
    let tensor = t("neural.csv");
    ok(&gapfill(&[
        "score", "--bundle", s(&t("d7/bundles/img_000")), "--scorer", "neural", "--checkpoint", s(&ckpt), "--out", s(&tensor),
    ]));
    let text = std::fs::read_to_string(&tensor).unwrap();
    assert!(text.contains("# scorer: neural"));
    assert!(!text.contains("# checkpoint: -"));

    // a 7% model refuses 14% pieces
    let out = gapfill(&[
        "score", "--bundle", s(&t("d14/bundles/img_000")), "--scorer", "neural", "--checkpoint", s(&ckpt), "--out", s(&t("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("erosion"));
    assert!(!t("x.csv").exists());
}
