//! PSF degradation of source images: `I_synth = S * PSF`.
//!
//! Convolution runs in the frequency domain on a reflect-padded copy of the
//! image (mirrored about the border, edge pixel repeated), then the valid
//! region is cropped back to the input size.

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft2::fft2;
use crate::image::GrayImage;
use crate::optics::PsfImage;

/// Slack allowed on pre-clamp output before the result counts as a numeric failure.
pub const RANGE_SLACK: f64 = 1e-6;

/// A dense convolution kernel with its origin at `(height/2, width/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} kernel values for {width}x{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Centered `side`×`side` crop of a PSF, renormalized to unit sum.
    pub fn cropped(psf: &PsfImage, side: usize) -> Result<Self> {
        if side == 0 || side > psf.size {
            return Err(Error::InvalidArgument(format!(
                "crop side {side} outside 1..={}",
                psf.size
            )));
        }
        let c = psf.size / 2;
        let start = c - side / 2;
        let mut values = Vec::with_capacity(side * side);
        for r in start..start + side {
            values
                .extend_from_slice(&psf.values[r * psf.size + start..r * psf.size + start + side]);
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numeric("cropped kernel has zero energy".into()));
        }
        values.iter_mut().for_each(|v| *v /= total);
        Self::new(side, side, values)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl From<&PsfImage> for Kernel {
    fn from(psf: &PsfImage) -> Self {
        Self {
            width: psf.size,
            height: psf.size,
            values: psf.values.clone(),
        }
    }
}

/// Half-sample symmetric reflection into `0..n` (`-1 -> 0`, `n -> n - 1`);
/// caller guarantees `|overshoot| <= n`.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let j = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - 1 - i
    } else {
        i
    };
    j as usize
}

/// Padding `(before, after)` along an axis for a kernel of length `k`.
pub(crate) fn pads(k: usize) -> (usize, usize) {
    let c = k / 2;
    (k - 1 - c, c)
}

fn check_size(image: &GrayImage, kernel: &Kernel) -> Result<()> {
    let (pt, pb) = pads(kernel.height);
    let (pl, pr) = pads(kernel.width);
    let fits = |p: usize, n: usize| p < n;
    if !(fits(pt, image.height())
        && fits(pb, image.height())
        && fits(pl, image.width())
        && fits(pr, image.width()))
    {
        return Err(Error::KernelTooLarge {
            kernel_w: kernel.width,
            kernel_h: kernel.height,
            image_w: image.width(),
            image_h: image.height(),
        });
    }
    Ok(())
}

/// 'Same'-size FFT convolution without clamping. Values may fall marginally
/// outside [0, 1] through round-off, or substantially for kernels with
/// negative taps.
pub fn convolve_unclamped(image: &GrayImage, kernel: &Kernel) -> Result<Vec<f64>> {
    check_size(image, kernel)?;
    let (w, h) = (image.width(), image.height());
    let (pt, _) = pads(kernel.height);
    let (pl, _) = pads(kernel.width);
    let ph = h + kernel.height - 1;
    let pw = w + kernel.width - 1;

    let src = image.data();
    let mut padded = vec![Complex64::new(0.0, 0.0); ph * pw];
    for py in 0..ph {
        let sy = reflect(py as isize - pt as isize, h);
        for px in 0..pw {
            let sx = reflect(px as isize - pl as isize, w);
            padded[py * pw + px].re = src[sy * w + sx];
        }
    }
    let mut kern = vec![Complex64::new(0.0, 0.0); ph * pw];
    for ky in 0..kernel.height {
        for kx in 0..kernel.width {
            kern[ky * pw + kx].re = kernel.values[ky * kernel.width + kx];
        }
    }
    fft2(&mut padded, ph, pw, FftDirection::Forward);
    fft2(&mut kern, ph, pw, FftDirection::Forward);
    for (a, b) in padded.iter_mut().zip(&kern) {
        *a *= b;
    }
    fft2(&mut padded, ph, pw, FftDirection::Inverse);
    let scale = 1.0 / (ph * pw) as f64;
    let (oy, ox) = (kernel.height - 1, kernel.width - 1);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &padded[(y + oy) * pw + ox..(y + oy) * pw + ox + w];
        out.extend(row.iter().map(|z| z.re * scale));
    }
    Ok(out)
}

/// Degrades `image` with `kernel`, returning an image of the same size and
/// bit depth. Fails if any pre-clamp value leaves `[-1e-6, 1 + 1e-6]`.
pub fn convolve_kernel(image: &GrayImage, kernel: &Kernel) -> Result<GrayImage> {
    let raw = convolve_unclamped(image, kernel)?;
    if let Some((i, v)) = raw
        .iter()
        .enumerate()
        .find(|(_, v)| !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(*v))
    {
        return Err(Error::Numeric(format!(
            "convolution output {v} at pixel {i} outside [0, 1]"
        )));
    }
    let data = raw.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(GrayImage::new(image.width(), image.height(), data)?.with_bit_depth(image.bit_depth))
}

/// Degrades `image` with a full PSF grid.
pub fn convolve(image: &GrayImage, psf: &PsfImage) -> Result<GrayImage> {
    convolve_kernel(image, &Kernel::from(psf))
}
