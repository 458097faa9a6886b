use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use aberrsim::classifier::{
    self, class_names, evaluate, load_checkpoint, load_samples, loss_log_csv, save_checkpoint,
    train_with, ClassifierModel, LossKind, HEAD_NAMES,
};
use aberrsim::datasetgen::{
    coefficients_for, heldout_set, jittered_set, plcm_train_set_with, render_manifest,
    AberrationType, DatasetManifest, PairSplit, SingleType, AMPLITUDE_LEVELS, TEST_NAMESPACE,
    TRAIN_NAMESPACE,
};
use aberrsim::degrade::convolve;
use aberrsim::export::{
    sidecar_path, svg_line_chart, write_json, write_otf_magnitude, write_psf, Series, Sidecar,
};
use aberrsim::image::{load_image, save_image, BitDepth};
use aberrsim::metrics::{compare, format_psnr};
use aberrsim::optics::{mtf_profile, otf, psf as render_psf, MtfCurve, ZernikeCoefficients};
use aberrsim::segmentation::{
    eval_csv, evaluate_otsu, write_eval_items, write_truth_masks, EvalItem, EvalRow, TruthIndex,
};
use aberrsim::synth::cell_blobs;
use rayon::prelude::*;

use crate::config::{required, type_name, RunConfig, ScheduleKind, Split};
use crate::{
    CliError, DegradeArgs, EvalArgs, GenArgs, MtfArgs, OtsuEvalArgs, PsfArgs, SweepArgs, SynthArgs,
    TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(aberrsim::Error::Io {
        path: path.into(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.paths.out.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn describe(c: &ZernikeCoefficients) -> String {
    if c.is_empty() {
        return "none".into();
    }
    c.iter()
        .map(|(i, a)| format!("Z{i}={a}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn points(curve: &MtfCurve) -> Vec<(f64, f64)> {
    curve
        .points
        .iter()
        .map(|p| (p.freq_cycles_per_um, p.mtf))
        .collect()
}

pub fn psf(cfg: &RunConfig, a: PsfArgs) -> Result<()> {
    let optics = a.optics.resolve(cfg)?;
    let coeffs = a.aberration.coefficients()?;
    let out = out_dir(a.out, cfg);
    create_dir(&out)?;
    let kernel = render_psf(&optics, &coeffs)?;
    let files = write_psf(&kernel, &out.join(&a.name), true)?;
    let peak = (0..kernel.values.len())
        .max_by(|&i, &j| kernel.values[i].total_cmp(&kernel.values[j]))
        .unwrap_or(0);
    println!("coefficients   {}", describe(&coeffs));
    println!("grid           {0}x{0}", kernel.size);
    println!(
        "peak (row,col) ({}, {})",
        peak / kernel.size,
        peak % kernel.size
    );
    println!("undersampled   {}", kernel.undersampled);
    println!("wrote          {}", files.grid.display());
    println!("               {}", files.sidecar.display());
    if let Some(p) = files.preview {
        println!("               {}", p.display());
    }
    Ok(())
}

pub fn mtf(cfg: &RunConfig, a: MtfArgs) -> Result<()> {
    let optics = a.optics.resolve(cfg)?;
    let coeffs = a.aberration.coefficients()?;
    let out = out_dir(a.out, cfg);
    create_dir(&out)?;
    let kernel = render_psf(&optics, &coeffs)?;
    let grid = otf(&kernel)?;
    let curve = mtf_profile(&grid);
    write_text(&out.join("mtf.csv"), &curve.to_csv())?;
    write_otf_magnitude(&grid, &out.join("otf_mag.f32"))?;
    if a.svg {
        let reference = mtf_profile(&otf(&render_psf(&optics, &ZernikeCoefficients::new())?)?);
        let (ours, dl) = (points(&curve), points(&reference));
        let svg = svg_line_chart(
            "MTF",
            "spatial frequency (cycles/um)",
            "MTF",
            &[
                Series {
                    name: "aberrated",
                    points: &ours,
                },
                Series {
                    name: "diffraction limited",
                    points: &dl,
                },
            ],
        );
        write_text(&out.join("mtf.svg"), &svg)?;
    }
    println!("coefficients       {}", describe(&coeffs));
    println!(
        "incoherent cutoff  {:.4} cycles/um",
        optics.incoherent_cutoff()
    );
    println!("nyquist            {:.4} cycles/um", optics.nyquist());
    println!("undersampled       {}", kernel.undersampled);
    println!("area under MTF     {:.6}", curve.area());
    println!("wrote              {}", out.join("mtf.csv").display());
    Ok(())
}

pub fn degrade(cfg: &RunConfig, a: DegradeArgs) -> Result<()> {
    let optics = a.optics.resolve(cfg)?;
    let coeffs = a.aberration.coefficients()?;
    let image_path = required(a.image, &cfg.paths.image, "image")?;
    let out = required(a.out, &cfg.paths.out, "out")?;
    let source = load_image(&image_path)?;
    let kernel = render_psf(&optics, &coeffs)?;
    let mut degraded = convolve(&source, &kernel)?;
    let raw = out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("f32"));
    degraded = match (raw, source.bit_depth) {
        (true, _) => degraded.with_bit_depth(BitDepth::Float32),
        (false, BitDepth::Float32) => degraded.with_bit_depth(BitDepth::Sixteen),
        (false, d) => degraded.with_bit_depth(d),
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_image(&degraded, &out)?;
    let meta = Sidecar {
        source: image_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned()),
        ..Sidecar::from(&kernel)
    };
    write_json(&meta, &sidecar_path(&out))?;
    let m = compare(&source, &degraded, 1.0)?;
    println!("coefficients  {}", describe(&coeffs));
    println!("psnr_db       {}", format_psnr(m.psnr_db));
    println!("ssim          {:.6}", m.ssim);
    println!("pearson       {:.6}", m.pearson);
    println!("wrote         {}", out.display());
    Ok(())
}

pub const SWEEP_CSV_HEADER: &str = "amplitude,aberration,psnr_db,ssim,pearson";

pub fn sweep_metrics(cfg: &RunConfig, a: SweepArgs) -> Result<()> {
    let optics = a.optics.resolve(cfg)?;
    let image_path = required(a.image, &cfg.paths.image, "image")?;
    let out = a
        .out
        .or_else(|| cfg.paths.out.clone())
        .unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let t = SingleType::from(a.kind);
    let source = load_image(&image_path)?;
    // Reference: the same optics without aberration.
    let reference = convolve(&source, &render_psf(&optics, &ZernikeCoefficients::new())?)?;
    let mut amps: Vec<f64> = AMPLITUDE_LEVELS.to_vec();
    if a.with_zero {
        amps.push(0.0);
    }
    amps.sort_by(f64::total_cmp);
    let rows = amps
        .par_iter()
        .map(|&amp| {
            let img = if amp == 0.0 {
                reference.clone()
            } else {
                convolve(&source, &render_psf(&optics, &coefficients_for(t, amp))?)?
            };
            Ok((amp, compare(&reference, &img, 1.0)?))
        })
        .collect::<std::result::Result<Vec<_>, aberrsim::Error>>()?;

    let mut csv = format!("{SWEEP_CSV_HEADER}\n");
    println!(
        "{:>9} {:>10} {:>9} {:>9}",
        "amplitude", "psnr_db", "ssim", "pearson"
    );
    for (amp, m) in &rows {
        let psnr = format_psnr(m.psnr_db);
        let shown = if m.psnr_db.is_finite() {
            format!("{:.2}", m.psnr_db)
        } else {
            psnr.clone()
        };
        csv += &format!(
            "{amp},{},{psnr},{:.6},{:.6}\n",
            type_name(t),
            m.ssim,
            m.pearson
        );
        println!("{amp:>9} {shown:>10} {:>9.4} {:>9.4}", m.ssim, m.pearson);
    }
    write_text(&out, &csv)?;
    if a.svg {
        let ssim: Vec<(f64, f64)> = rows.iter().map(|(a, m)| (*a, m.ssim)).collect();
        let r: Vec<(f64, f64)> = rows.iter().map(|(a, m)| (*a, m.pearson)).collect();
        let psnr: Vec<(f64, f64)> = rows
            .iter()
            .filter(|(_, m)| m.psnr_db.is_finite())
            .map(|(a, m)| (*a, m.psnr_db))
            .collect();
        let title = format!("{} sweep", type_name(t));
        let similarity = svg_line_chart(
            &title,
            "amplitude (um)",
            "similarity",
            &[
                Series {
                    name: "SSIM",
                    points: &ssim,
                },
                Series {
                    name: "Pearson r",
                    points: &r,
                },
            ],
        );
        write_text(&out.with_extension("svg"), &similarity)?;
        let chart = svg_line_chart(
            &title,
            "amplitude (um)",
            "PSNR (dB)",
            &[Series {
                name: "PSNR",
                points: &psnr,
            }],
        );
        write_text(&stem_suffix(&out, "_psnr", "svg"), &chart)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// `dir/stem<suffix>.<ext>` for `dir/stem.*`.
fn stem_suffix(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

pub fn gen_dataset(cfg: &RunConfig, a: GenArgs) -> Result<()> {
    let sched = cfg.schedule.clone().unwrap_or_default();
    let kind = if a.plcm_train {
        Some(ScheduleKind::PlcmTrain)
    } else if a.plcm_test {
        Some(ScheduleKind::PlcmTest)
    } else {
        a.schedule.or(sched.kind)
    }
    .ok_or_else(|| {
        CliError::Config("choose a schedule: --plcm-train, --plcm-test or --schedule".into())
    })?;
    let optics = a.optics.resolve(cfg)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let mixed = a.mixed_per_range.or(sched.mixed_per_range);
    let singles = a.singles_per_type.or(sched.singles_per_type);
    let split: PairSplit = a.split.or(sched.split).unwrap_or(Split::Equal).into();
    let manifest = match kind {
        ScheduleKind::PlcmTrain => plcm_train_set_with(seed, mixed.unwrap_or(500), split),
        ScheduleKind::PlcmTest => heldout_set(
            seed,
            TEST_NAMESPACE,
            singles.unwrap_or(5),
            mixed.unwrap_or(50),
        ),
        ScheduleKind::Heldout => heldout_set(
            seed,
            TEST_NAMESPACE,
            singles.unwrap_or(5),
            mixed.unwrap_or(10),
        ),
        ScheduleKind::Jittered => jittered_set(
            seed,
            TRAIN_NAMESPACE,
            a.jitters.or(sched.jitters).unwrap_or(3),
            mixed.unwrap_or(50),
        ),
    };
    let out = required(a.out, &cfg.paths.out, "out")?;
    let sources = a.sources.or_else(|| cfg.paths.sources.clone());
    let summary = render_manifest(&manifest, &optics, &out, sources.as_deref())?;

    let mut counts: BTreeMap<AberrationType, usize> = BTreeMap::new();
    for r in &summary.manifest.records {
        *counts.entry(r.label.aberration_type()).or_default() += 1;
    }
    println!("{:<12} {:>7}", "type", "records");
    for (t, n) in &counts {
        println!("{:<12} {n:>7}", t.name());
    }
    let under = summary
        .manifest
        .records
        .iter()
        .filter(|r| r.undersampled)
        .count();
    println!("{:<12} {:>7}", "total", summary.manifest.len());
    println!("undersampled {under}, degraded images {}", summary.degraded);
    println!("wrote {}", summary.manifest_path.display());
    Ok(())
}

fn manifest_samples(path: &Path) -> Result<Vec<classifier::Sample>> {
    let manifest = DatasetManifest::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(load_samples(&manifest, base)?)
}

fn input_side(samples: &[classifier::Sample]) -> Result<usize> {
    let n = samples.first().map(|s| s.input.len()).unwrap_or(0);
    let side = (n as f64).sqrt().round() as usize;
    if n == 0 || side * side != n || samples.iter().any(|s| s.input.len() != n) {
        return Err(CliError::Config(
            "manifest PSFs must be non-empty square grids of one size".into(),
        ));
    }
    Ok(side)
}

pub fn train(cfg: &RunConfig, a: TrainArgs) -> Result<()> {
    let manifest = required(a.manifest, &cfg.paths.manifest, "manifest")?;
    let model_path = required(a.model, &cfg.paths.model, "model")?;
    let mut tc = cfg.train.clone().unwrap_or_default();
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = a.lr {
        tc.learning_rate = v;
    }
    if let Some(v) = a.seed.or(cfg.seed) {
        tc.seed = v;
    }
    if a.mse {
        tc.loss = LossKind::Mse;
    }
    tc.validate()?;
    let samples = manifest_samples(&manifest)?;
    if samples.is_empty() {
        return Err(CliError::Config("training manifest is empty".into()));
    }
    let mut model = ClassifierModel::new(input_side(&samples)?, tc.seed)?;
    println!(
        "{} samples, {} parameters, {} epochs",
        samples.len(),
        model.param_count(),
        tc.epochs
    );
    let log = train_with(&mut model, &samples, &tc, |e| {
        if e.epoch % 10 == 0 || e.epoch + 1 == tc.epochs {
            println!(
                "epoch {:>4}  lr {:.6}  loss {:.6}",
                e.epoch, e.learning_rate, e.loss
            );
        }
    })?;
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_checkpoint(&model, Some(&tc), &model_path)?;
    let loss_csv = model_path.with_extension("loss.csv");
    write_text(&loss_csv, &loss_log_csv(&log))?;
    if a.svg {
        let pts: Vec<(f64, f64)> = log.iter().map(|e| (e.epoch as f64, e.loss)).collect();
        let svg = svg_line_chart(
            "training loss",
            "epoch",
            "loss",
            &[Series {
                name: "loss",
                points: &pts,
            }],
        );
        write_text(&model_path.with_extension("loss.svg"), &svg)?;
    }
    print!("{}", evaluate(&model, &samples)?.summary_table());
    println!("wrote {} and {}", model_path.display(), loss_csv.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, a: EvalArgs) -> Result<()> {
    let model_path = required(a.model, &cfg.paths.model, "model")?;
    let manifest = required(a.manifest, &cfg.paths.manifest, "manifest")?;
    let out = out_dir(a.out, cfg);
    let (model, _) = load_checkpoint(&model_path)?;
    let samples = manifest_samples(&manifest)?;
    if samples.is_empty() {
        return Err(CliError::Config("evaluation manifest is empty".into()));
    }
    if input_side(&samples)? != model.input_size() {
        return Err(CliError::Config(format!(
            "model expects {0}x{0} PSFs",
            model.input_size()
        )));
    }
    let report = evaluate(&model, &samples)?;
    create_dir(&out)?;
    let mut summary = String::from("head,accuracy,macro_precision\n");
    for (h, m) in report.matrices().into_iter().enumerate() {
        let path = out.join(format!("confusion_{}.csv", HEAD_NAMES[h]));
        write_text(&path, &m.to_csv(&class_names(h)))?;
        summary += &format!(
            "{},{:.6},{:.6}\n",
            HEAD_NAMES[h], report.accuracy[h], report.macro_precision[h]
        );
    }
    summary += &format!(
        "head_inconsistency_rate,{:.6},\n",
        report.head_inconsistency_rate
    );
    write_text(&out.join("eval_summary.csv"), &summary)?;
    print!("{}", report.summary_table());
    println!("wrote confusion matrices to {}", out.display());
    Ok(())
}

fn mean(rows: &[&EvalRow], f: impl Fn(&EvalRow) -> f64) -> f64 {
    rows.iter().map(|r| f(r)).sum::<f64>() / rows.len().max(1) as f64
}

pub fn otsu_eval(cfg: &RunConfig, a: OtsuEvalArgs) -> Result<()> {
    let manifest = required(a.manifest, &cfg.paths.manifest, "manifest")?;
    let truth = required(a.truth, &cfg.paths.truth, "truth")?;
    let out = a
        .out
        .or_else(|| cfg.paths.out.clone())
        .unwrap_or_else(|| PathBuf::from("otsu_eval.csv"));
    let rows = evaluate_otsu(&manifest, &truth)?;
    write_text(&out, &eval_csv(&rows))?;

    let mut groups: BTreeMap<&str, Vec<&EvalRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry(&r.item.aberration).or_default().push(r);
    }
    println!(
        "{:<12} {:>6} {:>8} {:>8} {:>8}",
        "aberration", "images", "ap50", "ap75", "ap_coco"
    );
    for (name, g) in &groups {
        println!(
            "{name:<12} {:>6} {:>8.2} {:>8.2} {:>8.2}",
            g.len(),
            mean(g, |r| r.report.ap50),
            mean(g, |r| r.report.ap75),
            mean(g, |r| r.report.ap_coco)
        );
    }
    if a.svg {
        let curves: Vec<(String, Vec<(f64, f64)>)> = groups
            .iter()
            .map(|(name, g)| {
                let mut pts: Vec<(f64, f64)> = g
                    .iter()
                    .map(|r| (r.item.amplitude, r.report.ap_coco))
                    .collect();
                pts.sort_by(|x, y| x.0.total_cmp(&y.0));
                (name.to_string(), pts)
            })
            .collect();
        let series: Vec<Series> = curves
            .iter()
            .map(|(n, p)| Series { name: n, points: p })
            .collect();
        let svg = svg_line_chart("Otsu AP", "amplitude (um)", "AP 0.50:0.95", &series);
        write_text(&out.with_extension("svg"), &svg)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn synth_blobs(cfg: &RunConfig, a: SynthArgs) -> Result<()> {
    let optics = a.optics.resolve(cfg)?;
    let out = required(a.out, &cfg.paths.out, "out")?;
    let mut params = cfg.blobs.clone().unwrap_or_default();
    if let Some(v) = a.seed.or(cfg.seed) {
        params.seed = v;
    }
    if let Some(v) = a.count {
        params.count = v;
    }
    if let Some(v) = a.width {
        params.width = v;
    }
    if let Some(v) = a.height {
        params.height = v;
    }
    let kinds: Vec<SingleType> = if a.kinds.is_empty() {
        SingleType::ALL.to_vec()
    } else {
        a.kinds.iter().map(|&k| k.into()).collect()
    };
    let amps: Vec<f64> = if a.amps.is_empty() {
        AMPLITUDE_LEVELS.to_vec()
    } else {
        a.amps.clone()
    };
    if let Some(bad) = amps.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(CliError::Config(format!("amplitude {bad} must be >= 0")));
    }

    let blobs = cell_blobs(&params)?;
    let clean = blobs.image.with_bit_depth(BitDepth::Sixteen);
    create_dir(&out.join("degraded"))?;
    save_image(&clean, out.join("clean.png"))?;
    let files = write_truth_masks(&blobs.truth, &out.join("masks"), "clean", &out)?;
    let mut index = TruthIndex::new();
    index.insert("clean".into(), files);
    write_json(&index, &out.join("truth.json"))?;
    write_json(&params, &out.join("blob_params.json"))?;

    let jobs: Vec<(SingleType, f64)> = kinds
        .iter()
        .flat_map(|&t| amps.iter().map(move |&a| (t, a)))
        .collect();
    let degraded = jobs
        .par_iter()
        .map(|&(t, amp)| {
            let kernel = render_psf(&optics, &coefficients_for(t, amp))?;
            let img = convolve(&clean, &kernel)?;
            let rel = format!("degraded/{}_{amp}.png", type_name(t));
            save_image(&img, out.join(&rel))?;
            Ok(EvalItem {
                image: rel,
                aberration: type_name(t).into(),
                amplitude: amp,
                truth: "clean".into(),
            })
        })
        .collect::<std::result::Result<Vec<_>, aberrsim::Error>>()?;
    let mut items = vec![EvalItem {
        image: "clean.png".into(),
        aberration: "none".into(),
        amplitude: 0.0,
        truth: "clean".into(),
    }];
    items.extend(degraded);
    let manifest = out.join("blobs.jsonl");
    write_eval_items(&items, &manifest)?;
    println!(
        "{} blobs on {}x{}, {} degraded images",
        blobs.truth.len(),
        params.width,
        params.height,
        items.len() - 1
    );
    println!(
        "wrote {} and {}",
        manifest.display(),
        out.join("truth.json").display()
    );
    Ok(())
}
