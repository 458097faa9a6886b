//! Aberration schedules, labeled manifests and dataset rendering.

mod label;
mod manifest;
mod render;
mod schedule;

pub use label::{
    AberrationLabel, AberrationType, AmplitudeLevel, Category, MixedRange, SingleType,
    AMPLITUDE_CLASSES, AMPLITUDE_LEVELS,
};
pub use manifest::{DatasetManifest, ManifestRecord};
pub use render::{list_sources, render_manifest, RenderSummary, DEGRADED_DIR, MANIFEST_FILE};
pub use schedule::{
    coefficients_for, coefficients_with_split, fine_amplitudes, heldout_set, item_seed,
    jittered_set, mix64, mixed_sample, plcm_test_set, plcm_train_set, plcm_train_set_with,
    sample_amplitude, single_schedule, PairSplit, FINE_SAMPLE_FROM, MIXED_SIGMA, TEST_NAMESPACE,
    TRAIN_NAMESPACE,
};
