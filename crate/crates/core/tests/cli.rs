use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use suimkit::dataset_io::{read_mask, write_mask, write_soft_gray};
use suimkit::palette::{derive_saliency, Category, DEFAULT_THRESHOLD};
use suimkit::synth::{random_labels, random_shapes, scenes, write_corpus};

fn suimkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_suimkit"))
        .args(args)
        .env_remove("SUIMKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = suimkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decode_then_encode_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in 0..5 {
        let mask = dir.path().join(format!("m{i}.ppm"));
        write_mask(&mask, &random_labels(13 + i, 7 + 2 * i, &mut rng)).unwrap();
        let labels = dir.path().join(format!("m{i}.pgm"));
        let back = dir.path().join(format!("back{i}.ppm"));
        ok(&["decode", "--mask", s(&mask), "--out", s(&labels)]);
        ok(&["encode", "--input", s(&labels), "--out", s(&back)]);
        assert_eq!(fs::read(&mask).unwrap(), fs::read(&back).unwrap());
    }
}

#[test]
fn saliency_defaults_next_to_mask() {
    let dir = tempfile::tempdir().unwrap();
    let map = random_shapes(20, 16, &mut ChaCha8Rng::seed_from_u64(3));
    let mask = dir.path().join("m.png");
    write_mask(&mask, &map).unwrap();
    ok(&["saliency", "--mask", s(&mask)]);
    let img = image::open(dir.path().join("m_saliency.png")).unwrap().to_luma8();
    let want = derive_saliency(&map);
    let got: Vec<u8> = img.pixels().map(|p| u8::from(p.0[0] == 255)).collect();
    assert_eq!(got, want.data);
}

#[test]
fn channels_writes_one_file_per_output() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("scene.png");
    write_mask(&mask, &random_shapes(8, 8, &mut ChaCha8Rng::seed_from_u64(4))).unwrap();
    let out = dir.path().join("ch");
    let listed = ok(&["channels", "--mask", s(&mask), "--mode", "major5", "--out", s(&out)]);
    assert_eq!(listed.lines().count(), 5);
    for code in ["HD", "WR", "RO", "RI", "FV"] {
        assert!(out.join(format!("scene_{code}.png")).exists(), "{code}");
    }
}

#[test]
fn eval_reports_categories_and_combined() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt, out) = (dir.path().join("pred"), dir.path().join("gt"), dir.path().join("report"));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..3 {
        let m = random_shapes(16, 12, &mut rng);
        write_mask(gt.join(format!("{i}.png")), &m).unwrap();
        write_mask(pred.join(format!("{i}.bmp")), &m).unwrap();
    }
    let csv = ok(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--mode", "major5", "--out", s(&out)]);
    let rows: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["HD", "WR", "RO", "RI", "FV", "combined"]);
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap(), csv);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["combined"]["f_mean"], 1.0);
    assert_eq!(json["n_images"], 3);
    assert!(out.join("per_image.csv").exists());
}

#[test]
fn eval_reads_soft_saliency_maps() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    let map = random_shapes(10, 10, &mut ChaCha8Rng::seed_from_u64(6));
    write_mask(gt.join("a.png"), &map).unwrap();
    let sal = derive_saliency(&map);
    let soft: Vec<f32> = sal.data.iter().map(|&v| if v == 1 { 0.8 } else { 0.3 }).collect();
    write_soft_gray(pred.join("a.png"), 10, 10, &soft).unwrap();
    let csv = ok(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--mode", "saliency1"]);
    assert!(csv.lines().nth(1).unwrap().starts_with("SAL,1.000000,"), "{csv}");
}

#[test]
fn stats_writes_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    write_corpus(&corpus, &scenes(5, 16, 16, &Category::ALL[1..], 0).unwrap()).unwrap();
    let out = dir.path().join("stats");
    let printed = ok(&["stats", "--masks", s(&corpus.join("masks")), "--images", s(&corpus.join("images")), "--out", s(&out)]);
    assert!(printed.starts_with("category,images\nBW,5\n"), "{printed}");
    for f in ["occurrence.csv", "correlation.csv", "intensity.csv", "stats.json", "occurrence.png", "correlation.png", "intensity.png"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn train_zero_epochs_then_infer() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    write_corpus(&corpus, &scenes(3, 24, 20, &Category::ALL[1..], 9).unwrap()).unwrap();
    let run = dir.path().join("run");
    ok(&["train", "--data", s(&corpus), "--variant", "rsb", "--epochs", "0", "--resolution", "16x16", "--width", "2", "--out", s(&run)]);
    assert!(run.join("initial.ckpt").exists());
    assert_eq!(fs::read(run.join("initial.ckpt")).unwrap(), fs::read(run.join("final.ckpt")).unwrap());
    let history: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("history.json")).unwrap()).unwrap();
    assert_eq!(history["train_loss"], serde_json::json!([]));
    assert_eq!(history["steps"], 0);
    let log = fs::read_to_string(run.join("train.log")).unwrap();
    assert!(log.lines().all(|l| l.split(' ').next().unwrap().contains('.')), "{log}");

    let out = dir.path().join("pred");
    ok(&["infer", "--checkpoint", s(&run.join("final.ckpt")), "--input", s(&corpus.join("images")), "--soft", "--out", s(&out)]);
    for stem in ["0000", "0001", "0002"] {
        let m = read_mask(out.join(format!("{stem}.png")), DEFAULT_THRESHOLD).unwrap();
        assert_eq!((m.width(), m.height()), (16, 16));
        assert!(out.join(format!("{stem}_FV_soft.png")).exists());
    }
}

#[test]
fn same_seed_same_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    write_corpus(&corpus, &scenes(4, 16, 16, &Category::ALL[1..], 2).unwrap()).unwrap();
    let train = |name: &str| {
        let run = dir.path().join(name);
        ok(&["train", "--data", s(&corpus), "--epochs", "2", "--batch", "2", "--resolution", "16x16", "--width", "2", "--seed", "5", "--val-split", "0.25", "--out", s(&run)]);
        run
    };
    let (a, b) = (train("a"), train("b"));
    for f in ["history.json", "history.csv", "final.ckpt", "spec.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_errors_exit_2() {
    for args in [&["nope"][..], &["eval", "--pred", "p"], &["decode", "--mask", "m", "--out", "o", "--extra"], &["bench", "--variant", "unet"]] {
        let out = suimkit(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error: usage: "), "{err}");
    }
}

#[test]
fn domain_errors_exit_1_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = suimkit(&["train", "--data", s(dir.path()), "--epochs", "0", "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: layout: "), "{err}");
    assert_eq!(err.lines().count(), 1);

    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let out = suimkit(&["infer", "--checkpoint", s(&bad), "--input", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: corrupt-checkpoint: "));
}

#[test]
fn thread_cap_is_validated() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_suimkit"))
            .args(["bench", "--resolution", "16x16", "--width", "2", "--iters", "1"])
            .env("SUIMKIT_THREADS", v)
            .output()
            .unwrap()
    };
    assert!(run("2").status.success());
    let bad = run("zero");
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8(bad.stderr).unwrap().starts_with("error: invalid-parameter: "));
}

#[test]
fn bench_reports_json() {
    let out = ok(&["bench", "--variant", "vgg", "--resolution", "32x32", "--width", "2", "--iters", "2", "--warmup", "0"]);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["variant"], "vgg");
    assert!(v["fps"].as_f64().unwrap() > 0.0);
}
