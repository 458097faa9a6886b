//! Simulation of Zernike-aberrated microscope imaging: PSF synthesis,
//! image degradation, similarity metrics, labeled dataset generation, a
//! threshold segmentation baseline with AP scoring, and a small
//! multi-head PSF label classifier.

pub mod classifier;
pub mod datasetgen;
pub mod degrade;
pub mod error;
pub mod export;
pub mod fft2;
pub mod image;
pub mod metrics;
pub mod optics;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
