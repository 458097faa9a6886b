//! Aberration schedules and deterministic record seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::label::{AberrationLabel, AmplitudeLevel, MixedRange, SingleType, AMPLITUDE_LEVELS};
use super::manifest::{DatasetManifest, ManifestRecord};
use crate::optics::ZernikeCoefficients;

/// Standard deviation of the half-normal mixed-aberration sampler.
pub const MIXED_SIGMA: f64 = 1.0 / 3.0;
/// Fine-sampling half-width and step around levels ≥ 0.4, in hundredths of a micrometer.
const FINE_HALF_WIDTH: i32 = 5;
/// Levels at or above this receive fine sampling.
pub const FINE_SAMPLE_FROM: f64 = 0.4;

/// Seed namespaces keep train and test item seeds disjoint.
pub const TRAIN_NAMESPACE: u8 = 0;
pub const TEST_NAMESPACE: u8 = 1;

/// 64-bit finalizer from SplitMix64; a bijection on `u64`.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of record `index` under `namespace`: `mix64(base ^ (ns << 56 | index))`.
pub fn item_seed(base_seed: u64, namespace: u8, index: u64) -> u64 {
    debug_assert!(index < 1 << 56);
    mix64(base_seed ^ (((namespace as u64) << 56) | index))
}

/// How a scalar single-aberration amplitude maps onto its paired indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSplit {
    /// Full amplitude on every index of the pair.
    #[default]
    Equal,
    /// `amplitude/√2` on each index of a pair, so the RMS combination equals the label.
    RootTwo,
}

/// The 8 amplitude levels crossed with the 4 single types (32 entries).
pub fn single_schedule() -> Vec<(SingleType, f64)> {
    SingleType::ALL
        .iter()
        .flat_map(|&t| AMPLITUDE_LEVELS.iter().map(move |&a| (t, a)))
        .collect()
}

pub fn coefficients_for(t: SingleType, amplitude: f64) -> ZernikeCoefficients {
    coefficients_with_split(t, amplitude, PairSplit::Equal)
}

pub fn coefficients_with_split(
    t: SingleType,
    amplitude: f64,
    split: PairSplit,
) -> ZernikeCoefficients {
    let idx = t.indices();
    let per = match (split, idx.len()) {
        (PairSplit::RootTwo, 2) => amplitude / std::f64::consts::SQRT_2,
        _ => amplitude,
    };
    ZernikeCoefficients::from_pairs(idx.iter().map(|&i| (i, per)))
        .expect("single-type indices are in range")
}

/// Half-normal `|N(0, 1/3)|` amplitude clipped to `[0, 1]`.
pub fn sample_amplitude<R: Rng>(rng: &mut R) -> f64 {
    let normal = Normal::new(0.0, MIXED_SIGMA).expect("valid sigma");
    normal.sample(rng).abs().min(1.0)
}

/// Independent half-normal amplitudes on every index of `range`.
pub fn mixed_sample(range: MixedRange, seed: u64) -> ZernikeCoefficients {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ZernikeCoefficients::from_pairs(range.indices().map(|i| (i, sample_amplitude(&mut rng))))
        .expect("mixed indices are in range")
}

/// Amplitudes used for one level in the training set: the level itself
/// below 0.4, else the 11 values `level - 0.05 ..= level + 0.05` in 0.01 steps.
pub fn fine_amplitudes(level: AmplitudeLevel) -> Vec<f64> {
    let v = level.value();
    if v < FINE_SAMPLE_FROM {
        return vec![v];
    }
    let base = (v * 100.0).round() as i32;
    (-FINE_HALF_WIDTH..=FINE_HALF_WIDTH)
        .map(|d| (base + d) as f64 / 100.0)
        .collect()
}

struct Builder {
    base_seed: u64,
    namespace: u8,
    records: Vec<ManifestRecord>,
}

impl Builder {
    fn new(base_seed: u64, namespace: u8) -> Self {
        Self {
            base_seed,
            namespace,
            records: Vec::new(),
        }
    }

    fn next_seed(&self) -> u64 {
        item_seed(self.base_seed, self.namespace, self.records.len() as u64)
    }

    fn push(&mut self, label: AberrationLabel, coefficients: ZernikeCoefficients, seed: u64) {
        let index = self.records.len();
        self.records.push(ManifestRecord {
            path: format!("psf/{index:06}.f32"),
            label,
            coefficients,
            item_seed: seed,
            undersampled: false,
        });
    }

    fn single(&mut self, t: SingleType, level: AmplitudeLevel, amplitude: f64, split: PairSplit) {
        let seed = self.next_seed();
        self.push(
            AberrationLabel::single(t, level),
            coefficients_with_split(t, amplitude, split),
            seed,
        );
    }

    fn mixed(&mut self, r: MixedRange, count: usize) {
        for _ in 0..count {
            let seed = self.next_seed();
            self.push(AberrationLabel::mixed(r), mixed_sample(r, seed), seed);
        }
    }

    fn finish(self) -> DatasetManifest {
        DatasetManifest {
            base_seed: self.base_seed,
            records: self.records,
        }
    }
}

/// Training protocol: 192 fine-sampled single records then 500 mixed
/// records per order range.
pub fn plcm_train_set(base_seed: u64) -> DatasetManifest {
    plcm_train_set_with(base_seed, 500, PairSplit::Equal)
}

pub fn plcm_train_set_with(
    base_seed: u64,
    mixed_per_range: usize,
    split: PairSplit,
) -> DatasetManifest {
    let mut b = Builder::new(base_seed, TRAIN_NAMESPACE);
    for t in SingleType::ALL {
        for level in AmplitudeLevel::all() {
            for a in fine_amplitudes(level) {
                b.single(t, level, a, split);
            }
        }
    }
    for r in MixedRange::ALL {
        b.mixed(r, mixed_per_range);
    }
    b.finish()
}

/// Test protocol: 5 single records per type at uniformly drawn levels, then
/// 50 mixed records per order range.
pub fn plcm_test_set(base_seed: u64) -> DatasetManifest {
    heldout_set(base_seed, TEST_NAMESPACE, 5, 50)
}

/// Held-out set with `singles_per_type` exact-level single records per type
/// (level drawn from the record seed) and `mixed_per_range` mixed records.
pub fn heldout_set(
    base_seed: u64,
    namespace: u8,
    singles_per_type: usize,
    mixed_per_range: usize,
) -> DatasetManifest {
    let mut b = Builder::new(base_seed, namespace);
    for t in SingleType::ALL {
        for _ in 0..singles_per_type {
            let seed = b.next_seed();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let level = AmplitudeLevel::new(rng.random_range(0..AMPLITUDE_LEVELS.len())).unwrap();
            b.push(
                AberrationLabel::single(t, level),
                coefficients_for(t, level.value()),
                seed,
            );
        }
    }
    for r in MixedRange::ALL {
        b.mixed(r, mixed_per_range);
    }
    b.finish()
}

/// Reduced training set: every type × level repeated `jitters` times. The
/// first copy sits on the level; further copies of levels ≥ 0.4 take a
/// seed-drawn fine offset in ±0.05 (0.01 steps).
pub fn jittered_set(
    base_seed: u64,
    namespace: u8,
    jitters: usize,
    mixed_per_range: usize,
) -> DatasetManifest {
    let mut b = Builder::new(base_seed, namespace);
    for t in SingleType::ALL {
        for level in AmplitudeLevel::all() {
            let fine = fine_amplitudes(level);
            for j in 0..jitters {
                let seed = b.next_seed();
                let a = if j == 0 || fine.len() == 1 {
                    level.value()
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    fine[rng.random_range(0..fine.len())]
                };
                b.push(
                    AberrationLabel::single(t, level),
                    coefficients_for(t, a),
                    seed,
                );
            }
        }
    }
    for r in MixedRange::ALL {
        b.mixed(r, mixed_per_range);
    }
    b.finish()
}
