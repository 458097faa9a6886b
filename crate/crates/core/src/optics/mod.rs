//! Zernike wavefronts, generalized pupil, PSF, OTF and MTF.

mod config;
mod psf;
pub mod zernike;

pub use config::OpticalConfig;
pub use psf::{
    generalized_pupil, mtf_profile, otf, psf, MtfCurve, MtfPoint, OtfGrid, PsfImage, Pupil,
};
pub use zernike::{wavefront, zernike_eval, WavefrontMap, ZernikeCoefficients};
