//! Generalized pupil, intensity PSF, OTF and radial MTF.
//!
//! All grids are centered: the zero-frequency sample of a pupil or OTF and
//! the optical axis of a PSF sit at `(grid/2, grid/2)`. The frequency grid
//! has step `1/(grid·pixel)` and spans `[-nyq, nyq)`; the pupil excludes the
//! lone Nyquist row and column so that it stays 90°-rotation symmetric.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use super::config::OpticalConfig;
use super::zernike::{sample_wavefront, ZernikeCoefficients};
use crate::error::{Error, Result};
use crate::fft2::{fft2, fftshift, ifftshift};

/// Complex pupil P(fx, fy) on the centered frequency grid.
#[derive(Debug, Clone)]
pub struct Pupil {
    pub size: usize,
    /// Frequency step in cycles/µm.
    pub freq_step: f64,
    pub values: Vec<Complex64>,
    /// Aperture (|P|) in {0, 1}.
    pub aperture: Vec<bool>,
    /// The NA/λ disk reached the Nyquist line and was clipped there.
    pub undersampled: bool,
}

/// Builds `P = A·exp(i·(2π·φ/λ − f(m)))` with `A` the NA/λ disk.
pub fn generalized_pupil(config: &OpticalConfig, coeffs: &ZernikeCoefficients) -> Result<Pupil> {
    config.validate()?;
    let n = config.grid;
    let df = config.freq_step();
    let radius_px = config.pupil_cutoff() / df;
    let phi = sample_wavefront(coeffs, n, radius_px);
    let half = (n / 2) as isize;
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    let mut aperture = vec![false; n * n];
    for r in 0..n {
        let cy = r as isize - half;
        for c in 0..n {
            let cx = c as isize - half;
            if cx == -half || cy == -half {
                continue;
            }
            let rho = ((cx * cx + cy * cy) as f64).sqrt() / radius_px;
            if rho > 1.0 {
                continue;
            }
            let k = r * n + c;
            let phase = TAU * phi[k] / config.lambda_um - config.immersion_phase_rad;
            values[k] = Complex64::from_polar(1.0, phase);
            aperture[k] = true;
        }
    }
    Ok(Pupil {
        size: n,
        freq_step: df,
        values,
        aperture,
        undersampled: config.is_undersampled(),
    })
}

/// Normalized, nonnegative intensity point-spread function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsfImage {
    pub size: usize,
    /// Row-major intensities summing to 1.
    pub values: Vec<f64>,
    pub config: OpticalConfig,
    pub coefficients: ZernikeCoefficients,
    pub undersampled: bool,
}

impl PsfImage {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    /// Centered unit impulse, useful as an identity kernel.
    pub fn delta(config: &OpticalConfig) -> Self {
        let n = config.grid;
        let mut values = vec![0.0; n * n];
        values[(n / 2) * n + n / 2] = 1.0;
        Self {
            size: n,
            values,
            config: config.clone(),
            coefficients: ZernikeCoefficients::new(),
            undersampled: config.is_undersampled(),
        }
    }

    /// Intensity-weighted centroid `(x, y)` in pixel indices.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.size;
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                let v = self.values[r * n + c];
                sx += v * c as f64;
                sy += v * r as f64;
                s += v;
            }
        }
        (sx / s, sy / s)
    }

    /// Central second moments `(mxx, myy, mxy)` in pixel² units.
    pub fn second_moments(&self) -> (f64, f64, f64) {
        let n = self.size;
        let (cx, cy) = self.centroid();
        let (mut xx, mut yy, mut xy, mut s) = (0.0, 0.0, 0.0, 0.0);
        for r in 0..n {
            let dy = r as f64 - cy;
            for c in 0..n {
                let dx = c as f64 - cx;
                let v = self.values[r * n + c];
                xx += v * dx * dx;
                yy += v * dy * dy;
                xy += v * dx * dy;
                s += v;
            }
        }
        (xx / s, yy / s, xy / s)
    }

    /// Ratio of the larger to the smaller principal axis variance.
    pub fn axis_ratio(&self) -> f64 {
        let (xx, yy, xy) = self.second_moments();
        let mean = 0.5 * (xx + yy);
        let dev = (0.25 * (xx - yy).powi(2) + xy * xy).sqrt();
        (mean + dev) / (mean - dev)
    }
}

/// Intensity PSF `|F⁻¹{P}|²`, centered and normalized to unit sum.
pub fn psf(config: &OpticalConfig, coeffs: &ZernikeCoefficients) -> Result<PsfImage> {
    let pupil = generalized_pupil(config, coeffs)?;
    let values = intensity_from_pupil(&pupil.values, pupil.size)?;
    Ok(PsfImage {
        size: pupil.size,
        values,
        config: config.clone(),
        coefficients: coeffs.clone(),
        undersampled: pupil.undersampled,
    })
}

pub(crate) fn intensity_from_pupil(pupil: &[Complex64], n: usize) -> Result<Vec<f64>> {
    let mut field = ifftshift(pupil, n, n);
    fft2(&mut field, n, n, FftDirection::Inverse);
    let field = fftshift(&field, n, n);
    let mut intensity: Vec<f64> = field.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = intensity.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numeric(format!(
            "PSF has non-positive total energy {total}"
        )));
    }
    for v in &mut intensity {
        *v /= total;
    }
    Ok(intensity)
}

/// Optical transfer function on the centered frequency grid.
#[derive(Debug, Clone)]
pub struct OtfGrid {
    pub size: usize,
    /// Frequency step in cycles/µm.
    pub freq_step: f64,
    pub values: Vec<Complex64>,
}

impl OtfGrid {
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.size + col]
    }

    pub fn dc(&self) -> Complex64 {
        let h = self.size / 2;
        self.at(h, h)
    }
}

/// Fourier transform of the intensity PSF, normalized to unit DC.
pub fn otf(psf: &PsfImage) -> Result<OtfGrid> {
    let n = psf.size;
    let centered: Vec<Complex64> = psf.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut spec = ifftshift(&centered, n, n);
    fft2(&mut spec, n, n, FftDirection::Forward);
    let mut values = fftshift(&spec, n, n);
    let dc = values[(n / 2) * n + n / 2];
    if dc.norm() <= 0.0 || !dc.norm().is_finite() {
        return Err(Error::Numeric("OTF has zero DC component".into()));
    }
    for v in &mut values {
        *v /= dc;
    }
    Ok(OtfGrid {
        size: n,
        freq_step: 1.0 / (n as f64 * psf.config.pixel_um),
        values,
    })
}

/// One sample of the radial MTF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtfPoint {
    pub freq_cycles_per_um: f64,
    pub mtf: f64,
}

/// Azimuthally averaged |OTF| against radial frequency.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MtfCurve {
    pub points: Vec<MtfPoint>,
}

impl MtfCurve {
    /// Linear interpolation of the curve at `freq`; `None` outside its span.
    pub fn at(&self, freq: f64) -> Option<f64> {
        let p = &self.points;
        if p.is_empty() || freq < p[0].freq_cycles_per_um {
            return None;
        }
        for w in p.windows(2) {
            let (a, b) = (w[0], w[1]);
            if freq <= b.freq_cycles_per_um {
                let t =
                    (freq - a.freq_cycles_per_um) / (b.freq_cycles_per_um - a.freq_cycles_per_um);
                return Some(a.mtf + t * (b.mtf - a.mtf));
            }
        }
        (freq == p[p.len() - 1].freq_cycles_per_um).then(|| p[p.len() - 1].mtf)
    }

    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                0.5 * (w[0].mtf + w[1].mtf) * (w[1].freq_cycles_per_um - w[0].freq_cycles_per_um)
            })
            .sum()
    }

    /// CSV with header `freq_cycles_per_um,mtf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_cycles_per_um,mtf\n");
        for p in &self.points {
            s.push_str(&format!("{},{}\n", p.freq_cycles_per_um, p.mtf));
        }
        s
    }
}

/// Radial profile of |OTF| in bins one frequency step wide. Bin `k` collects
/// samples whose radius rounds to `k` steps; empty bins are dropped.
pub fn mtf_profile(otf: &OtfGrid) -> MtfCurve {
    let n = otf.size;
    let half = (n / 2) as f64;
    let nbins = (half * std::f64::consts::SQRT_2).ceil() as usize + 2;
    let mut sum = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    for r in 0..n {
        let dy = r as f64 - half;
        for c in 0..n {
            let dx = c as f64 - half;
            let k = (dx * dx + dy * dy).sqrt().round() as usize;
            sum[k] += otf.values[r * n + c].norm();
            count[k] += 1;
        }
    }
    let points = sum
        .iter()
        .zip(&count)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .map(|(k, (&s, &c))| MtfPoint {
            freq_cycles_per_um: k as f64 * otf.freq_step,
            mtf: s / c as f64,
        })
        .collect();
    MtfCurve { points }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fine() -> OpticalConfig {
        OpticalConfig {
            pixel_um: 0.1,
            grid: 128,
            ..OpticalConfig::dnn()
        }
    }

    fn coeffs(pairs: &[(u32, f64)]) -> ZernikeCoefficients {
        ZernikeCoefficients::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn unaberrated_pupil_is_real_disk() {
        let p = generalized_pupil(&fine(), &ZernikeCoefficients::new()).unwrap();
        for (v, &a) in p.values.iter().zip(&p.aperture) {
            assert_eq!(v.im, 0.0);
            assert_eq!(v.re, if a { 1.0 } else { 0.0 });
        }
        assert!(!p.undersampled);
    }

    #[test]
    fn pupil_modulus_is_aperture() {
        let cfg = fine();
        let c = coeffs(&[(4, 0.3), (8, 0.7), (17, -0.4)]);
        let p0 = generalized_pupil(&cfg, &ZernikeCoefficients::new()).unwrap();
        let p = generalized_pupil(&cfg, &c).unwrap();
        assert_eq!(p.aperture, p0.aperture);
        for (v, &a) in p.values.iter().zip(&p.aperture) {
            assert!((v.norm() - if a { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn spherical_phase_at_center_is_full_wave() {
        let cfg = OpticalConfig {
            lambda_um: 0.35,
            ..fine()
        };
        let p = generalized_pupil(&cfg, &coeffs(&[(8, 0.35)])).unwrap();
        let h = cfg.grid / 2;
        let z = p.values[h * cfg.grid + h];
        assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dnn_and_livecell_clip_at_nyquist() {
        assert!(
            generalized_pupil(&OpticalConfig::livecell(), &ZernikeCoefficients::new())
                .unwrap()
                .undersampled
        );
        let p = generalized_pupil(&OpticalConfig::dnn(), &ZernikeCoefficients::new()).unwrap();
        assert!(p.undersampled);
        // Nyquist row stays empty
        assert!(p.aperture[..p.size].iter().all(|&a| !a));
    }

    #[test]
    fn unaberrated_psf_peaks_at_center_and_is_rotation_symmetric() {
        for cfg in [fine(), OpticalConfig::dnn()] {
            let p = psf(&cfg, &ZernikeCoefficients::new()).unwrap();
            let n = p.size;
            let h = n / 2;
            let peak = p.values.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(p.at(h, h), peak);
            for r in 0..n {
                for c in 0..n {
                    // (x, y) -> (-y, x) about the center, periodic
                    let (x, y) = (c as isize - h as isize, r as isize - h as isize);
                    let rr = (x + h as isize).rem_euclid(n as isize) as usize;
                    let rc = (-y + h as isize).rem_euclid(n as isize) as usize;
                    assert!((p.at(r, c) - p.at(rr, rc)).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn psf_normalized_and_nonnegative() {
        let p = psf(
            &OpticalConfig::dnn(),
            &coeffs(&[(6, 0.5), (7, 0.5), (15, 0.2)]),
        )
        .unwrap();
        let s: f64 = p.values.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(p.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn psf_deterministic() {
        let c = coeffs(&[(9, 0.4), (10, 0.4)]);
        let a = psf(&OpticalConfig::dnn(), &c).unwrap();
        let b = psf(&OpticalConfig::dnn(), &c).unwrap();
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn phase_wraps_modulo_two_pi() {
        let cfg = fine();
        let c = coeffs(&[(8, cfg.lambda_um)]);
        let p = generalized_pupil(&cfg, &c).unwrap();
        let wrapped: Vec<Complex64> = p
            .values
            .iter()
            .map(|z| {
                if z.norm() == 0.0 {
                    *z
                } else {
                    Complex64::from_polar(1.0, z.arg().rem_euclid(TAU) - TAU)
                }
            })
            .collect();
        let a = psf(&cfg, &c).unwrap();
        let b = intensity_from_pupil(&wrapped, cfg.grid).unwrap();
        for (x, y) in a.values.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn otf_dc_is_one_and_bounded() {
        let p = psf(&fine(), &coeffs(&[(4, 0.2), (11, 0.3)])).unwrap();
        let o = otf(&p).unwrap();
        assert!((o.dc().norm() - 1.0).abs() < 1e-12);
        assert!(o.values.iter().all(|z| z.norm() <= 1.0 + 1e-9));
    }

    #[test]
    fn delta_otf_is_flat() {
        let d = PsfImage::delta(&fine());
        let o = otf(&d).unwrap();
        assert!(o.values.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn otf_vanishes_beyond_incoherent_cutoff() {
        let cfg = fine();
        let o = otf(&psf(&cfg, &ZernikeCoefficients::new()).unwrap()).unwrap();
        let n = o.size;
        let h = n as f64 / 2.0;
        let cutoff = cfg.incoherent_cutoff();
        let mut checked = 0;
        for r in 0..n {
            for c in 0..n {
                let f = ((r as f64 - h).powi(2) + (c as f64 - h).powi(2)).sqrt() * o.freq_step;
                if f > cutoff + 2.0 * o.freq_step {
                    assert!(
                        o.at(r, c).norm() < 1e-9,
                        "|OTF|={} at f={f}",
                        o.at(r, c).norm()
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn mtf_starts_at_unity() {
        let o = otf(&psf(&OpticalConfig::dnn(), &coeffs(&[(5, 0.8)])).unwrap()).unwrap();
        let m = mtf_profile(&o);
        assert_eq!(m.points[0].freq_cycles_per_um, 0.0);
        assert!((m.points[0].mtf - 1.0).abs() < 1e-12);
        assert!(m.points.iter().all(|p| p.mtf <= 1.0 + 1e-9 && p.mtf >= 0.0));
        assert!(m
            .points
            .windows(2)
            .all(|w| w[0].freq_cycles_per_um < w[1].freq_cycles_per_um));
        assert!(m.to_csv().starts_with("freq_cycles_per_um,mtf\n"));
    }

    #[test]
    fn mtf_area_shrinks_with_astigmatism() {
        let cfg = OpticalConfig::dnn();
        let area = |a: f64| {
            let c = coeffs(&[(4, a), (5, a)]);
            mtf_profile(&otf(&psf(&cfg, &c).unwrap()).unwrap()).area()
        };
        assert!(area(1.0) < area(0.05));
    }

    #[test]
    fn astigmatic_psf_is_spread_but_isotropic_in_second_moments() {
        let cfg = OpticalConfig::dnn();
        let p0 = psf(&cfg, &ZernikeCoefficients::new()).unwrap();
        let p = psf(&cfg, &coeffs(&[(4, 0.6)])).unwrap();
        let (xx0, yy0, _) = p0.second_moments();
        let (xx, yy, xy) = p.second_moments();
        assert!(xx + yy > 2.0 * (xx0 + yy0));
        // ρ²cos2θ maps to its negative under x<->y, which leaves |PSF| moments equal
        assert!((xx / yy - 1.0).abs() < 1e-6);
        assert!(xy.abs() < 1e-3 * (xx + yy));
        assert!(p.axis_ratio() < 1.01);
    }

    #[test]
    fn mtf_interpolation() {
        let m = MtfCurve {
            points: vec![
                MtfPoint {
                    freq_cycles_per_um: 0.0,
                    mtf: 1.0,
                },
                MtfPoint {
                    freq_cycles_per_um: 1.0,
                    mtf: 0.5,
                },
            ],
        };
        assert_eq!(m.at(0.5), Some(0.75));
        assert_eq!(m.at(1.0), Some(0.5));
        assert_eq!(m.at(1.5), None);
        assert!((m.area() - 0.75).abs() < 1e-15);
    }
}
