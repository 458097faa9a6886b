//! Ground-truth masks on disk and batch Otsu evaluation.
//!
//! A truth index is a JSON object mapping a truth-set name to the list of
//! per-instance PNG bitmaps (nonzero = inside), relative to the index file.
//! An evaluation manifest is JSON Lines of [`EvalItem`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ap::{ap_report, ApReport};
use super::mask::{InstanceMaskSet, Mask};
use super::otsu::segment_otsu;
use crate::error::{Error, Result};
use crate::image::load_image;

pub type TruthIndex = BTreeMap<String, Vec<String>>;

pub const EVAL_CSV_HEADER: &str = "image,aberration,amplitude,ap50,ap75,ap_coco";

/// One image to segment, with the truth set it is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalItem {
    /// Relative to the evaluation manifest.
    pub image: String,
    pub aberration: String,
    pub amplitude: f64,
    /// Key into the truth index.
    pub truth: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub item: EvalItem,
    pub report: ApReport,
}

pub fn save_mask_png(mask: &Mask, width: usize, height: usize, path: &Path) -> Result<()> {
    let mut raw = vec![0u8; width * height];
    for &p in mask.pixels() {
        raw[p as usize] = 255;
    }
    let buf: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(width as u32, height as u32, raw).expect("sized buffer");
    buf.save(path).map_err(|e| Error::Codec {
        path: path.into(),
        source: e,
    })
}

pub fn load_mask_png(path: &Path) -> Result<(usize, usize, Mask)> {
    let img = load_image(path)?;
    let pixels = img
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, _)| i as u32)
        .collect();
    Ok((img.width(), img.height(), Mask::from_sorted(pixels, None)))
}

/// Writes one PNG per mask as `<dir>/<prefix>_<k>.png` and returns the
/// paths relative to `relative_to`.
pub fn write_truth_masks(
    set: &InstanceMaskSet,
    dir: &Path,
    prefix: &str,
    relative_to: &Path,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    set.masks()
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let path = dir.join(format!("{prefix}_{k:03}.png"));
            save_mask_png(m, set.width(), set.height(), &path)?;
            Ok(relative(&path, relative_to))
        })
        .collect()
}

fn relative(path: &Path, base: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

pub fn read_truth_index(path: &Path) -> Result<TruthIndex> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads truth set `name` from the index at `index_path`, checking every
/// bitmap against the given dims.
pub fn load_truth(
    index: &TruthIndex,
    index_path: &Path,
    name: &str,
    width: usize,
    height: usize,
) -> Result<InstanceMaskSet> {
    let files = index
        .get(name)
        .ok_or_else(|| Error::InvalidArgument(format!("truth set {name:?} not in index")))?;
    let base = index_path.parent().unwrap_or(Path::new("."));
    let masks = files
        .iter()
        .map(|f| {
            let path = base.join(f);
            let (w, h, m) = load_mask_png(&path)?;
            if (w, h) != (width, height) {
                return Err(Error::DimensionMismatch(format!(
                    "{}: {w}x{h} mask for a {width}x{height} image",
                    path.display()
                )));
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    InstanceMaskSet::new(width, height, masks)
}

pub fn read_eval_items(path: &Path) -> Result<Vec<EvalItem>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub fn write_eval_items(items: &[EvalItem], path: &Path) -> Result<()> {
    let mut s = String::new();
    for it in items {
        s += &serde_json::to_string(it)?;
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Segments every item with Otsu and scores it, in manifest order.
pub fn evaluate_otsu(manifest_path: &Path, index_path: &Path) -> Result<Vec<EvalRow>> {
    let items = read_eval_items(manifest_path)?;
    let index = read_truth_index(index_path)?;
    let base: PathBuf = manifest_path.parent().unwrap_or(Path::new(".")).into();
    items
        .into_par_iter()
        .map(|item| {
            let image = load_image(base.join(&item.image))?;
            let truth = load_truth(
                &index,
                index_path,
                &item.truth,
                image.width(),
                image.height(),
            )?;
            let report = ap_report(&segment_otsu(&image)?, &truth)?;
            Ok(EvalRow { item, report })
        })
        .collect()
}

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from(EVAL_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s += &format!(
            "{},{},{},{:.4},{:.4},{:.4}\n",
            r.item.image,
            r.item.aberration,
            r.item.amplitude,
            r.report.ap50,
            r.report.ap75,
            r.report.ap_coco
        );
    }
    s
}
