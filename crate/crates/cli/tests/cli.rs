use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aberrsim::export::Sidecar;
use aberrsim::image::{load_image, save_image, GrayImage};

fn aberrsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aberrsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = aberrsim(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    aberrsim(dir, args).status.code().unwrap()
}

fn sidecar(path: &Path) -> Sidecar {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn psf_writes_grid_preview_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "psf",
            "--preset",
            "dnn",
            "--type",
            "spherical",
            "--amp",
            "0.4",
            "--out",
            "s",
        ],
    );
    for f in ["psf.f32", "psf.png", "psf.json"] {
        assert!(d.join("s").join(f).is_file(), "{f}");
    }
    let meta = sidecar(&d.join("s/psf.json"));
    assert_eq!(meta.coefficients.iter().collect::<Vec<_>>(), vec![(8, 0.4)]);

    ok(d, &["psf", "--preset", "dnn", "--out", "flat"]);
    let preview = load_image(d.join("flat/psf.png")).unwrap();
    let peak = (0..preview.data().len())
        .max_by(|&i, &j| preview.data()[i].total_cmp(&preview.data()[j]))
        .unwrap();
    assert_eq!((peak % preview.width(), peak / preview.width()), (32, 32));

    ok(
        d,
        &[
            "psf", "--preset", "livecell", "--type", "coma", "--amp", "1.0", "--out", "lc",
        ],
    );
    assert!(sidecar(&d.join("lc/psf.json")).undersampled);
}

#[test]
fn sweep_rows_follow_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = GrayImage::from_fn(96, 96, |x, y| {
        0.1 + 0.7 * (((x / 12) + (y / 16)) % 2) as f64
    })
    .unwrap();
    save_image(&img, d.join("src.png")).unwrap();

    ok(
        d,
        &[
            "sweep-metrics",
            "--image",
            "src.png",
            "--type",
            "coma",
            "--out",
            "a.csv",
        ],
    );
    let text = fs::read_to_string(d.join("a.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "amplitude,aberration,psnr_db,ssim,pearson");
    assert_eq!(lines.len(), 9);
    let amps: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(amps, [0.05, 0.1, 0.15, 0.2, 0.4, 0.6, 0.8, 1.0]);

    ok(
        d,
        &[
            "sweep-metrics",
            "--image",
            "src.png",
            "--type",
            "coma",
            "--with-zero",
            "--out",
            "b.csv",
            "--svg",
        ],
    );
    let text = fs::read_to_string(d.join("b.csv")).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert_eq!(text.lines().nth(1).unwrap(), "0,coma,inf,1.000000,1.000000");
    assert!(d.join("b.svg").is_file() && d.join("b_psnr.svg").is_file());
}

#[test]
fn plcm_train_generation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["gen-dataset", "--plcm-train", "--seed", "7", "--out", "a"],
    );
    ok(
        d,
        &["gen-dataset", "--plcm-train", "--seed", "7", "--out", "b"],
    );
    let a = fs::read(d.join("a/manifest.jsonl")).unwrap();
    assert_eq!(a, fs::read(d.join("b/manifest.jsonl")).unwrap());
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 192 + 4 * 500);
}

#[test]
fn train_then_eval_writes_confusion_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = ["--grid", "32", "--seed", "2"];
    let mut args = vec![
        "gen-dataset",
        "--schedule",
        "jittered",
        "--jitters",
        "1",
        "--mixed-per-range",
        "2",
        "--out",
        "train",
    ];
    args.extend(common);
    ok(d, &args);
    let mut args = vec![
        "gen-dataset",
        "--schedule",
        "heldout",
        "--singles-per-type",
        "1",
        "--mixed-per-range",
        "1",
        "--out",
        "test",
    ];
    args.extend(common);
    ok(d, &args);
    let train = [
        "train",
        "--manifest",
        "train/manifest.jsonl",
        "--model",
        "m.bin",
        "--epochs",
        "3",
    ];
    ok(d, &train);
    let first = fs::read(d.join("m.bin")).unwrap();
    ok(d, &train);
    assert_eq!(first, fs::read(d.join("m.bin")).unwrap());
    let log = fs::read_to_string(d.join("m.loss.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);

    let table = ok(
        d,
        &[
            "eval",
            "--model",
            "m.bin",
            "--manifest",
            "test/manifest.jsonl",
            "--out",
            "ev",
        ],
    );
    assert!(table.contains("macro_precision"));
    for (head, k) in [("category", 2), ("type", 8), ("amplitude", 9)] {
        let csv = fs::read_to_string(d.join(format!("ev/confusion_{head}.csv"))).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), k + 1, "{head}");
        let total: u64 = rows[1..]
            .iter()
            .flat_map(|r| r.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()))
            .sum();
        assert_eq!(total, 8);
    }
}

#[test]
fn synth_blobs_then_otsu_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth = [
        "synth-blobs",
        "--out",
        "b",
        "--count",
        "6",
        "--width",
        "96",
        "--height",
        "96",
        "--type",
        "spherical",
        "--amps",
        "0.1,1.0",
    ];
    ok(d, &synth);
    let clean = fs::read(d.join("b/clean.png")).unwrap();
    let items = fs::read_to_string(d.join("b/blobs.jsonl")).unwrap();
    ok(d, &synth);
    assert_eq!(clean, fs::read(d.join("b/clean.png")).unwrap());
    assert_eq!(items, fs::read_to_string(d.join("b/blobs.jsonl")).unwrap());
    assert_eq!(items.lines().count(), 3);

    ok(
        d,
        &[
            "otsu-eval",
            "--manifest",
            "b/blobs.jsonl",
            "--truth",
            "b/truth.json",
            "--out",
            "ap.csv",
            "--svg",
        ],
    );
    let csv = fs::read_to_string(d.join("ap.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "image,aberration,amplitude,ap50,ap75,ap_coco"
    );
    assert_eq!(
        lines.next().unwrap(),
        "clean.png,none,0,100.0000,100.0000,100.0000"
    );
    assert!(d.join("ap.svg").is_file());
}

#[test]
fn degrade_records_its_source() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = GrayImage::from_fn(64, 64, |x, y| ((x * 5 + y * 3) % 17) as f64 / 16.0).unwrap();
    save_image(&img, d.join("in.png")).unwrap();
    ok(
        d,
        &[
            "degrade",
            "--image",
            "in.png",
            "--coef",
            "6=0.3",
            "--coef",
            "9=0.1",
            "--out",
            "o/out.png",
        ],
    );
    let meta = sidecar(&d.join("o/out.json"));
    assert_eq!(meta.source.as_deref(), Some("in.png"));
    assert_eq!(meta.coefficients.len(), 2);
    assert_eq!(load_image(d.join("o/out.png")).unwrap().width(), 64);
}

#[test]
fn run_config_paths_resolve_against_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("cfg")).unwrap();
    fs::write(
        d.join("cfg/run.json"),
        r#"{"preset": "livecell", "paths": {"out": "psf_out"}}"#,
    )
    .unwrap();
    ok(d, &["psf", "--config", "cfg/run.json"]);
    let meta = sidecar(&d.join("cfg/psf_out/psf.json"));
    assert_eq!(meta.config.na, 1.35);

    fs::write(d.join("cfg/bad.json"), r#"{"preset": "dnn", "extra": 1}"#).unwrap();
    assert_eq!(code(d, &["psf", "--config", "cfg/bad.json"]), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["psf", "--no-such-flag"]), 2);
    assert_eq!(code(d, &["psf", "--coef", "3=0.1"]), 2);
    assert_eq!(code(d, &["psf", "--type", "coma"]), 2);
    assert_eq!(
        code(d, &["degrade", "--image", "missing.png", "--out", "x.png"]),
        3
    );
    assert_eq!(
        code(
            d,
            &["eval", "--model", "missing.bin", "--manifest", "m.jsonl"]
        ),
        3
    );

    // A flat image has a single intensity level, so Otsu cannot split it.
    save_image(&GrayImage::filled(40, 40, 0.5).unwrap(), d.join("flat.png")).unwrap();
    fs::write(d.join("truth.json"), r#"{"none": []}"#).unwrap();
    fs::write(
        d.join("items.jsonl"),
        r#"{"image":"flat.png","aberration":"none","amplitude":0.0,"truth":"none"}"#,
    )
    .unwrap();
    assert_eq!(
        code(
            d,
            &[
                "otsu-eval",
                "--manifest",
                "items.jsonl",
                "--truth",
                "truth.json"
            ]
        ),
        4
    );

    let out = Command::new(env!("CARGO_BIN_EXE_aberrsim"))
        .current_dir(d)
        .env("ABERRSIM_THREADS", "0")
        .args(["psf"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_aberrsim"))
        .current_dir(d)
        .env("ABERRSIM_THREADS", "1")
        .args(["psf", "--out", "t1"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn nan_loss_exits_numeric() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-dataset",
            "--schedule",
            "heldout",
            "--singles-per-type",
            "1",
            "--mixed-per-range",
            "1",
            "--grid",
            "32",
            "--out",
            "t",
        ],
    );
    let out = aberrsim(
        d,
        &[
            "train",
            "--manifest",
            "t/manifest.jsonl",
            "--model",
            "m.bin",
            "--epochs",
            "5",
            "--lr",
            "1e308",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite loss"));
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 9] = [
        (
            "psf",
            &[
                "--preset", "--grid", "--type", "--amp", "--coef", "--out", "--name", "--config",
            ],
        ),
        ("mtf", &["--preset", "--type", "--coef", "--out", "--svg"]),
        (
            "degrade",
            &["--image", "--out", "--type", "--amp", "--coef"],
        ),
        (
            "sweep-metrics",
            &["--image", "--type", "--with-zero", "--out", "--svg"],
        ),
        (
            "gen-dataset",
            &[
                "--schedule",
                "--plcm-train",
                "--plcm-test",
                "--seed",
                "--mixed-per-range",
                "--singles-per-type",
                "--jitters",
                "--split",
                "--sources",
                "--out",
            ],
        ),
        (
            "train",
            &[
                "--manifest",
                "--model",
                "--epochs",
                "--batch-size",
                "--lr",
                "--mse",
                "--seed",
                "--svg",
            ],
        ),
        ("eval", &["--model", "--manifest", "--out"]),
        ("otsu-eval", &["--manifest", "--truth", "--out", "--svg"]),
        (
            "synth-blobs",
            &[
                "--out", "--seed", "--count", "--width", "--height", "--type", "--amps",
            ],
        ),
    ];
    for (cmd, flags) in cases {
        let help = ok(dir.path(), &[cmd, "--help"]);
        for f in flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}
