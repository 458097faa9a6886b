use crate::error::{Error, Result};

/// One instance: sorted, deduplicated row-major pixel indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pixels: Vec<u32>,
    pub score: Option<f64>,
}

impl Mask {
    pub fn new(mut pixels: Vec<u32>, score: Option<f64>) -> Self {
        pixels.sort_unstable();
        pixels.dedup();
        Self { pixels, score }
    }

    pub(crate) fn from_sorted(pixels: Vec<u32>, score: Option<f64>) -> Self {
        debug_assert!(pixels.windows(2).all(|w| w[0] < w[1]));
        Self { pixels, score }
    }

    /// Pixels `(x, y)` of a `width`-wide image where `inside` holds.
    pub fn from_predicate(
        width: usize,
        height: usize,
        score: Option<f64>,
        inside: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .filter(|&(x, y)| inside(x, y))
            .map(|(x, y)| (y * width + x) as u32)
            .collect();
        Self::from_sorted(pixels, score)
    }

    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    fn intersection(&self, other: &Mask) -> usize {
        let (a, b) = (&self.pixels, &other.pixels);
        if a.is_empty() || b.is_empty() || a[a.len() - 1] < b[0] || b[b.len() - 1] < a[0] {
            return 0;
        }
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// |a ∩ b| / |a ∪ b|.
pub fn mask_iou(a: &Mask, b: &Mask) -> f64 {
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMaskSet {
    width: usize,
    height: usize,
    masks: Vec<Mask>,
}

impl InstanceMaskSet {
    /// Rejects empty masks, out-of-range pixels and scores outside [0, 1].
    pub fn new(width: usize, height: usize, masks: Vec<Mask>) -> Result<Self> {
        let n = (width * height) as u64;
        for (i, m) in masks.iter().enumerate() {
            if m.pixels.is_empty() {
                return Err(Error::InvalidArgument(format!("mask {i} is empty")));
            }
            if *m.pixels.last().unwrap() as u64 >= n {
                return Err(Error::InvalidArgument(format!(
                    "mask {i} has pixels outside {width}x{height}"
                )));
            }
            if let Some(s) = m.score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::InvalidArgument(format!(
                        "mask {i} score {s} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self {
            width,
            height,
            masks,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            masks: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn pairwise_disjoint(&self) -> bool {
        let mut owner = vec![false; self.width * self.height];
        for m in &self.masks {
            for &p in &m.pixels {
                if std::mem::replace(&mut owner[p as usize], true) {
                    return false;
                }
            }
        }
        true
    }

    /// Label image: 0 for background, `k + 1` for mask `k`.
    pub fn label_image(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.width * self.height];
        for (k, m) in self.masks.iter().enumerate() {
            for &p in &m.pixels {
                out[p as usize] = k as u32 + 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_cases() {
        let sq = |x0: usize| {
            Mask::from_predicate(10, 10, None, move |x, y| (x0..x0 + 2).contains(&x) && y < 2)
        };
        assert_eq!(mask_iou(&sq(0), &sq(0)), 1.0);
        assert_eq!(mask_iou(&sq(0), &sq(5)), 0.0);
        assert!((mask_iou(&sq(0), &sq(1)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn set_validation() {
        assert!(InstanceMaskSet::new(4, 4, vec![Mask::new(vec![], None)]).is_err());
        assert!(InstanceMaskSet::new(4, 4, vec![Mask::new(vec![16], None)]).is_err());
        assert!(InstanceMaskSet::new(4, 4, vec![Mask::new(vec![3], Some(1.5))]).is_err());
        let s = InstanceMaskSet::new(4, 4, vec![Mask::new(vec![3, 1, 3], Some(0.5))]).unwrap();
        assert_eq!(s.masks()[0].pixels(), &[1, 3]);
    }
}
