use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Microscope parameters governing the pupil and the PSF sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    /// Detection numerical aperture.
    pub na: f64,
    /// Emission wavelength in micrometers.
    pub lambda_um: f64,
    /// Refractive index of the immersion medium.
    pub n_immersion: f64,
    /// Refractive index of the sample medium.
    pub n_med: f64,
    /// Detector pixel pitch in micrometers.
    pub pixel_um: f64,
    /// Side length of the square PSF grid.
    pub grid: usize,
    /// Constant immersion phase term f(m) in radians, applied uniformly
    /// inside the pupil.
    #[serde(default)]
    pub immersion_phase_rad: f64,
}

impl OpticalConfig {
    pub const DEFAULT_GRID: usize = 64;

    /// DNN dataset parameters: NA 0.75, λ 0.35 µm, n = nMed = 1, 0.25 µm pixels.
    pub fn dnn() -> Self {
        Self {
            na: 0.75,
            lambda_um: 0.35,
            n_immersion: 1.0,
            n_med: 1.0,
            pixel_um: 0.25,
            grid: Self::DEFAULT_GRID,
            immersion_phase_rad: 0.0,
        }
    }

    /// LIVECell dataset parameters: NA 1.35, λ 0.55 µm, n = nMed = 1, 1.24 µm pixels.
    pub fn livecell() -> Self {
        Self {
            na: 1.35,
            lambda_um: 0.55,
            n_immersion: 1.0,
            n_med: 1.0,
            pixel_um: 1.24,
            grid: Self::DEFAULT_GRID,
            immersion_phase_rad: 0.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "dnn" => Some(Self::dnn()),
            "livecell" => Some(Self::livecell()),
            _ => None,
        }
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.na > 0.0 && self.na.is_finite()) {
            return bad(format!("na must be > 0, got {}", self.na));
        }
        if !(self.lambda_um > 0.0 && self.lambda_um.is_finite()) {
            return bad(format!("lambda_um must be > 0, got {}", self.lambda_um));
        }
        if !(self.pixel_um > 0.0 && self.pixel_um.is_finite()) {
            return bad(format!("pixel_um must be > 0, got {}", self.pixel_um));
        }
        if self.grid < 32 || !self.grid.is_multiple_of(2) {
            return bad(format!("grid must be even and >= 32, got {}", self.grid));
        }
        if !(self.n_immersion >= 1.0) || !(self.n_med >= 1.0) {
            return bad(format!(
                "refractive indices must be >= 1, got n_immersion={} n_med={}",
                self.n_immersion, self.n_med
            ));
        }
        if !self.immersion_phase_rad.is_finite() {
            return bad("immersion_phase_rad must be finite".into());
        }
        Ok(())
    }

    /// Coherent pupil cutoff NA/λ in cycles/µm.
    pub fn pupil_cutoff(&self) -> f64 {
        self.na / self.lambda_um
    }

    /// Incoherent (OTF) cutoff 2·NA/λ in cycles/µm.
    pub fn incoherent_cutoff(&self) -> f64 {
        2.0 * self.pupil_cutoff()
    }

    /// Sampling Nyquist frequency 1/(2·pixel) in cycles/µm.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.pixel_um
    }

    /// Frequency-grid step 1/(grid·pixel) in cycles/µm.
    pub fn freq_step(&self) -> f64 {
        1.0 / (self.grid as f64 * self.pixel_um)
    }

    /// Pupil cutoff reaches the Nyquist line, so the pupil gets clipped.
    pub fn is_undersampled(&self) -> bool {
        self.pupil_cutoff() >= self.nyquist()
    }
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self::dnn()
    }
}
