use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::DatasetManifest;
use crate::degrade::convolve;
use crate::error::{Error, Result};
use crate::export::{sidecar_path, write_json, write_psf, Sidecar};
use crate::image::{load_image, save_image, BitDepth, GrayImage};
use crate::optics::{psf, OpticalConfig};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DEGRADED_DIR: &str = "degraded";

#[derive(Debug, Clone)]
pub struct RenderSummary {
    /// The input manifest with `undersampled` filled in from the config.
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    pub degraded: usize,
}

/// PNG and raw-float files directly inside `dir`, sorted by file name.
pub fn list_sources(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "f32")) {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no source images"),
        ));
    }
    Ok(out)
}

/// Renders every record's PSF under `out_dir` at its manifest path and
/// writes `manifest.jsonl`. With `sources`, record `i` also degrades source
/// `i mod n` (sorted by name) into `degraded/`.
pub fn render_manifest(
    manifest: &DatasetManifest,
    config: &OpticalConfig,
    out_dir: &Path,
    sources: Option<&Path>,
) -> Result<RenderSummary> {
    config.validate()?;
    manifest.validate()?;
    let sources: Vec<(String, GrayImage)> = match sources {
        Some(dir) => list_sources(dir)?
            .into_iter()
            .map(|p| {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                load_image(&p).map(|img| (name, img))
            })
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    if !sources.is_empty() {
        let d = out_dir.join(DEGRADED_DIR);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let undersampled: Vec<bool> = manifest
        .records
        .par_iter()
        .enumerate()
        .map(|(i, record)| -> Result<bool> {
            let kernel = psf(config, &record.coefficients)?;
            let grid = out_dir.join(&record.path);
            if let Some(parent) = grid.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            write_psf(&kernel, &grid, false)?;
            if !sources.is_empty() {
                let (name, image) = &sources[i % sources.len()];
                let degraded = convolve(image, &kernel)?;
                let stem = Path::new(&record.path)
                    .file_stem()
                    .map(|s| s.to_os_string())
                    .unwrap_or_else(|| format!("{i:06}").into());
                let ext = if degraded.bit_depth == BitDepth::Float32 {
                    "f32"
                } else {
                    "png"
                };
                let path = out_dir.join(DEGRADED_DIR).join(stem).with_extension(ext);
                save_image(&degraded, &path)?;
                let meta = Sidecar {
                    source: Some(name.clone()),
                    ..Sidecar::from(&kernel)
                };
                write_json(&meta, &sidecar_path(&path))?;
            }
            Ok(kernel.undersampled)
        })
        .collect::<Result<_>>()?;

    let mut rendered = manifest.clone();
    for (r, u) in rendered.records.iter_mut().zip(undersampled) {
        r.undersampled = u;
    }
    let manifest_path = out_dir.join(MANIFEST_FILE);
    rendered.write(&manifest_path)?;
    Ok(RenderSummary {
        degraded: if sources.is_empty() {
            0
        } else {
            rendered.len()
        },
        manifest: rendered,
        manifest_path,
    })
}
