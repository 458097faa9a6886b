//! Seeded synthetic "cell" images: non-overlapping shaded ellipses on a
//! dim background, with their instance masks as ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::segmentation::{InstanceMaskSet, Mask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobParams {
    pub width: usize,
    pub height: usize,
    pub count: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Minimum clearance between bounding circles, in pixels.
    pub gap: f64,
    pub background: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            count: 20,
            min_radius: 7.0,
            max_radius: 14.0,
            gap: 6.0,
            background: 0.1,
            noise: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
    brightness: f64,
}

impl Blob {
    /// Squared normalized radius of `(x, y)`; inside when ≤ 1.
    fn r2(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (s, c) = self.angle.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2)
    }
}

#[derive(Debug, Clone)]
pub struct BlobImage {
    pub image: GrayImage,
    pub truth: InstanceMaskSet,
}

pub fn cell_blobs(p: &BlobParams) -> Result<BlobImage> {
    if p.width < 8 || p.height < 8 || !(p.min_radius > 1.0 && p.max_radius >= p.min_radius) {
        return Err(Error::InvalidArgument(format!("bad blob parameters {p:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut blobs: Vec<Blob> = Vec::with_capacity(p.count);
    let margin = 4.0;
    let mut attempts = 0;
    while blobs.len() < p.count {
        attempts += 1;
        if attempts > 10_000 * p.count.max(1) {
            return Err(Error::InvalidArgument(format!(
                "could not place {} blobs in {}x{}",
                p.count, p.width, p.height
            )));
        }
        let a = rng.random_range(p.min_radius..=p.max_radius);
        let b = rng.random_range(p.min_radius..=a);
        let lo = a + margin;
        let (hx, hy) = (p.width as f64 - lo, p.height as f64 - lo);
        if hx <= lo || hy <= lo {
            continue;
        }
        let cx = rng.random_range(lo..hx);
        let cy = rng.random_range(lo..hy);
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let brightness = rng.random_range(0.6..0.9);
        if blobs
            .iter()
            .any(|o| (o.cx - cx).hypot(o.cy - cy) < o.a + a + p.gap)
        {
            continue;
        }
        blobs.push(Blob {
            cx,
            cy,
            a,
            b,
            angle,
            brightness,
        });
    }

    let mut data = vec![0.0; p.width * p.height];
    for v in data.iter_mut() {
        let n = if p.noise > 0.0 {
            rng.random_range(-p.noise..=p.noise)
        } else {
            0.0
        };
        *v = p.background + n;
    }
    let mut masks = Vec::with_capacity(blobs.len());
    for blob in &blobs {
        let mask = Mask::from_predicate(p.width, p.height, None, |x, y| {
            blob.r2(x as f64 + 0.5, y as f64 + 0.5) <= 1.0
        });
        for &px in mask.pixels() {
            let (x, y) = (px as usize % p.width, px as usize / p.width);
            let r2 = blob.r2(x as f64 + 0.5, y as f64 + 0.5);
            data[px as usize] = blob.brightness * (1.0 - 0.35 * r2);
        }
        masks.push(mask);
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(BlobImage {
        image: GrayImage::new(p.width, p.height, data)?,
        truth: InstanceMaskSet::new(p.width, p.height, masks)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{ap_report, segment_otsu};

    #[test]
    fn deterministic_and_disjoint() {
        let p = BlobParams {
            seed: 9,
            ..Default::default()
        };
        let a = cell_blobs(&p).unwrap();
        let b = cell_blobs(&p).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.truth.len(), 20);
        assert!(a.truth.pairwise_disjoint());
    }

    #[test]
    fn clean_image_segments_well() {
        let blobs = cell_blobs(&BlobParams::default()).unwrap();
        let pred = segment_otsu(&blobs.image).unwrap();
        assert!(pred.pairwise_disjoint());
        let r = ap_report(&pred, &blobs.truth).unwrap();
        assert_eq!(r.ap50, 100.0);
        assert!(r.ap_coco > 90.0, "{r:?}");
    }

    #[test]
    fn overcrowding_is_an_error() {
        let p = BlobParams {
            width: 32,
            height: 32,
            count: 30,
            ..Default::default()
        };
        assert!(cell_blobs(&p).is_err());
    }
}
