//! Full-reference similarity metrics: PSNR, SSIM and Pearson correlation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// SSIM window side.
pub const SSIM_WINDOW: usize = 11;
/// SSIM Gaussian window standard deviation.
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityReport {
    /// `f64::INFINITY` when the images are identical.
    pub psnr_db: f64,
    pub ssim: f64,
    pub pearson: f64,
}

fn check_dims(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// PSNR over raw sample values with the given peak signal.
pub fn psnr_values(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    if !(peak > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "peak must be > 0, got {peak}"
        )));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// PSNR with intensities expressed on a `[0, peak]` scale: `peak = 1` for
/// normalized images, `255` for the 8-bit convention.
pub fn psnr(a: &GrayImage, b: &GrayImage, peak: f64) -> Result<f64> {
    check_dims(a, b)?;
    let scale = |img: &GrayImage| img.data().iter().map(|v| v * peak).collect::<Vec<_>>();
    psnr_values(&scale(a), &scale(b), peak)
}

/// Normalized 1D Gaussian taps for the SSIM window.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut t: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|v| *v /= s);
    t
}

/// Separable 'valid' filtering of a `w`×`h` plane.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all fully contained 11×11 Gaussian windows, dynamic range 1.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w.min(h) < SSIM_WINDOW {
        return Err(Error::DimensionMismatch(format!(
            "SSIM needs both sides >= {SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mu_x = filter_valid(x, w, h, &taps);
    let mu_y = filter_valid(y, w, h, &taps);
    let e_xx = filter_valid(&xx, w, h, &taps);
    let e_yy = filter_valid(&yy, w, h, &taps);
    let e_xy = filter_valid(&xy, w, h, &taps);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok((total / n as f64).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation of the flattened intensities. If exactly one
/// image is constant, the correlation is reported as 0.
pub fn pearson(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_dims(a, b)?;
    let ma = a.mean();
    let mb = b.mean();
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    match (saa > 0.0, sbb > 0.0) {
        (false, false) => Err(Error::UndefinedCorrelation),
        (true, true) => Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)),
        _ => Ok(0.0),
    }
}

/// All three metrics of `test` against `reference`.
pub fn compare(reference: &GrayImage, test: &GrayImage, peak: f64) -> Result<SimilarityReport> {
    Ok(SimilarityReport {
        psnr_db: psnr(reference, test, peak)?,
        ssim: ssim(reference, test)?,
        pearson: pearson(reference, test)?,
    })
}

/// Formats a PSNR value for CSV, writing infinity as `inf`.
pub fn format_psnr(db: f64) -> String {
    if db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{db}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, v: &[f64]) -> GrayImage {
        GrayImage::new(w, h, v.to_vec()).unwrap()
    }

    fn textured(seed: u64) -> GrayImage {
        GrayImage::from_fn(32, 24, |x, y| {
            let t = (x as f64 * 0.37 + seed as f64).sin() * (y as f64 * 0.23).cos();
            0.5 + 0.4 * t
        })
        .unwrap()
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = textured(0);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(format_psnr(f64::INFINITY), "inf");
    }

    #[test]
    fn psnr_closed_form_eight_bit() {
        let a = vec![0.0; 64];
        let b = vec![10.0; 64];
        let v = psnr_values(&a, &b, 255.0).unwrap();
        let expect = 10.0 * (255.0f64 * 255.0 / 100.0).log10();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 28.13).abs() < 0.01);
        // same number through normalized images on the 255 scale
        let ia = GrayImage::filled(8, 8, 0.0).unwrap();
        let ib = GrayImage::filled(8, 8, 10.0 / 255.0).unwrap();
        assert!((psnr(&ia, &ib, 255.0).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn psnr_symmetric_and_checks_dims() {
        let (a, b) = (textured(1), textured(2));
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        let c = GrayImage::filled(3, 3, 0.2).unwrap();
        assert!(matches!(
            psnr(&a, &c, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let (a, b) = (textured(3), textured(4));
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ssim_needs_window() {
        let a = GrayImage::filled(10, 30, 0.3).unwrap();
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn gaussian_taps_normalized() {
        let t = gaussian_taps(11, 1.5);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(t[5] > t[4] && (t[4] - t[6]).abs() < 1e-18);
    }

    #[test]
    fn pearson_hand_values() {
        let a = img(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let b = img(2, 2, &[0.1, 0.3, 0.2, 0.4]);
        assert!((pearson(&a, &b).unwrap() - 0.8).abs() < 1e-9);
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert!((pearson(&a, &a.inverted()).unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn pearson_constant_images() {
        let c = GrayImage::filled(4, 4, 0.5).unwrap();
        assert!(matches!(pearson(&c, &c), Err(Error::UndefinedCorrelation)));
        let t = GrayImage::from_fn(4, 4, |x, _| x as f64 / 4.0).unwrap();
        assert_eq!(pearson(&c, &t).unwrap(), 0.0);
    }
}
