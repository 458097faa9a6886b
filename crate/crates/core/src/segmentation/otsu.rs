use std::collections::VecDeque;

use super::mask::{InstanceMaskSet, Mask};
use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const DEFAULT_MIN_AREA: usize = 16;

/// Histogram bin of an intensity in [0, 1].
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn histogram(image: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in image.data() {
        h[quantize(v) as usize] += 1;
    }
    h
}

/// Level `t` maximizing between-class variance for the split `<= t` / `> t`.
/// Ties go to the lowest level.
pub fn otsu_threshold(image: &GrayImage) -> Result<u8> {
    otsu_from_histogram(&histogram(image))
}

pub fn otsu_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let (mut w0, mut sum0) = (0u64, 0.0);
    let (mut best, mut best_var) = (0u8, -1.0);
    for t in 0..255usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best = t as u8;
        }
    }
    Ok(best)
}

/// 8-connected components of `fg`, in raster order of their first pixel.
pub fn connected_components(fg: &[bool], width: usize, height: usize) -> Vec<Vec<u32>> {
    let mut seen = vec![false; fg.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..fg.len() {
        if !fg[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i as u32);
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                        continue;
                    }
                    let j = ny as usize * width + nx as usize;
                    if fg[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn segment_otsu(image: &GrayImage) -> Result<InstanceMaskSet> {
    segment_otsu_with(image, DEFAULT_MIN_AREA)
}

/// Foreground is every pixel whose bin is above the Otsu level; components
/// below `min_area` pixels are dropped. Scores are all 1.
pub fn segment_otsu_with(image: &GrayImage, min_area: usize) -> Result<InstanceMaskSet> {
    let t = otsu_threshold(image)?;
    let fg: Vec<bool> = image.data().iter().map(|&v| quantize(v) > t).collect();
    let masks = connected_components(&fg, image.width(), image.height())
        .into_iter()
        .filter(|c| c.len() >= min_area)
        .map(|c| Mask::from_sorted(c, Some(1.0)))
        .collect();
    InstanceMaskSet::new(image.width(), image.height(), masks)
}
