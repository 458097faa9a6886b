//! File artifacts: PSF/OTF grids with JSON sidecars and PNG previews, and
//! a minimal SVG line chart for CSV curves.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{read_raw, write_raw};
use crate::optics::{OpticalConfig, OtfGrid, PsfImage, ZernikeCoefficients};

/// Metadata written next to every exported grid or degraded image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub config: OpticalConfig,
    pub coefficients: ZernikeCoefficients,
    pub undersampled: bool,
    /// Source image of a degraded output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl From<&PsfImage> for Sidecar {
    fn from(p: &PsfImage) -> Self {
        Sidecar {
            config: p.config.clone(),
            coefficients: p.coefficients.clone(),
            undersampled: p.undersampled,
            source: None,
        }
    }
}

/// Paths produced by [`write_psf`].
#[derive(Debug, Clone)]
pub struct PsfFiles {
    pub grid: PathBuf,
    pub sidecar: PathBuf,
    pub preview: Option<PathBuf>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

/// Writes `<stem>.f32`, `<stem>.json` and, if requested, `<stem>.png`.
pub fn write_psf(psf: &PsfImage, stem: &Path, preview: bool) -> Result<PsfFiles> {
    let grid = stem.with_extension("f32");
    let values: Vec<f32> = psf.values.iter().map(|&v| v as f32).collect();
    write_raw(&grid, psf.size, psf.size, &values)?;
    let sidecar = sidecar_path(&grid);
    write_json(&Sidecar::from(psf), &sidecar)?;
    let preview = if preview {
        let p = stem.with_extension("png");
        write_preview(&psf.values, psf.size, psf.size, &p)?;
        Some(p)
    } else {
        None
    };
    Ok(PsfFiles {
        grid,
        sidecar,
        preview,
    })
}

/// Reads a PSF grid and its sidecar back into a [`PsfImage`].
pub fn read_psf(grid: &Path) -> Result<PsfImage> {
    let (w, h, values) = read_raw(grid)?;
    if w != h {
        return Err(Error::Corrupt {
            path: grid.into(),
            offset: 8,
            reason: format!("PSF grid must be square, got {w}x{h}"),
        });
    }
    let meta: Sidecar = read_json(&sidecar_path(grid))?;
    let mut values: Vec<f64> = values.into_iter().map(f64::from).collect();
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    Ok(PsfImage {
        size: w,
        values,
        config: meta.config,
        coefficients: meta.coefficients,
        undersampled: meta.undersampled,
    })
}

/// Writes `|OTF|` as a raw float grid.
pub fn write_otf_magnitude(otf: &OtfGrid, path: &Path) -> Result<()> {
    let values: Vec<f32> = otf.values.iter().map(|z| z.norm() as f32).collect();
    write_raw(path, otf.size, otf.size, &values)
}

/// 16-bit grayscale preview scaled so the maximum maps to 65535.
pub fn write_preview(values: &[f64], width: usize, height: usize, path: &Path) -> Result<()> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let raw: Vec<u16> = values
        .iter()
        .map(|v| (v.max(0.0) * scale).round().min(65535.0) as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(width as u32, height as u32, raw).expect("sized buffer");
    buf.save(path).map_err(|e| Error::Codec {
        path: path.into(),
        source: e,
    })
}

/// A named polyline for [`svg_line_chart`].
pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Renders series as a plain SVG line chart with axis ticks at the data range ends.
pub fn svg_line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const ML: f64 = 70.0;
    const MR: f64 = 150.0;
    const MT: f64 = 40.0;
    const MB: f64 = 55.0;
    const COLORS: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    ];
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
    let esc = |s: &str| {
        s.replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
    };

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        (W - MR + ML) / 2.0,
        esc(title)
    );
    s += &format!(
        "<line x1=\"{ML}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = H - MB,
        r = W - MR
    );
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        s += &format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"{anchor}\">{:.3}</text>\n",
            px(v),
            H - MB + 16.0,
            v
        );
    }
    for v in [y0, y1] {
        s += &format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>\n",
            ML - 6.0,
            py(v) + 4.0,
            v
        );
    }
    s += &format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        (W - MR + ML) / 2.0,
        H - 12.0,
        esc(x_label)
    );
    s += &format!(
        "<text x=\"18\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {y})\">{}</text>\n",
        esc(y_label),
        y = (H - MB + MT) / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        s += &format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        );
        let ly = MT + 18.0 * i as f64;
        s += &format!(
            "<line x1=\"{a}\" y1=\"{ly}\" x2=\"{b}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{c}\" y=\"{t}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            esc(ser.name),
            a = W - MR + 12.0,
            b = W - MR + 32.0,
            c = W - MR + 38.0,
            t = ly + 4.0
        );
    }
    s += "</svg>\n";
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::psf;

    #[test]
    fn psf_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let c = ZernikeCoefficients::from_pairs([(8, 0.4)]).unwrap();
        let p = psf(&OpticalConfig::dnn(), &c).unwrap();
        let files = write_psf(&p, &dir.path().join("spherical"), true).unwrap();
        assert!(files.preview.unwrap().exists());
        let meta: Sidecar = read_json(&files.sidecar).unwrap();
        assert_eq!(meta.coefficients.get(8), 0.4);
        assert!(meta.undersampled);
        let back = read_psf(&files.grid).unwrap();
        assert_eq!(back.coefficients, c);
        let err: f64 = back
            .values
            .iter()
            .zip(&p.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-7);
    }

    #[test]
    fn chart_is_well_formed() {
        let pts = [(0.0, 1.0), (1.0, 0.5), (2.0, f64::INFINITY)];
        let svg = svg_line_chart(
            "MTF <test>",
            "f",
            "m",
            &[Series {
                name: "a",
                points: &pts,
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("MTF &lt;test&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
