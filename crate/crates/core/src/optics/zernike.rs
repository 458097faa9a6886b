//! Zernike polynomials in Wyant (fringe) ordering, indices 0 through 18.
//!
//! | index | polynomial | aberration |
//! | ----- | ---------- | ---------- |
//! | 0 | 1 | piston |
//! | 1, 2 | ρ cos θ, ρ sin θ | tilt |
//! | 3 | 2ρ² − 1 | defocus |
//! | 4, 5 | ρ² cos 2θ, ρ² sin 2θ | astigmatism |
//! | 6, 7 | (3ρ² − 2)ρ cos θ, (3ρ² − 2)ρ sin θ | coma |
//! | 8 | 6ρ⁴ − 6ρ² + 1 | spherical |
//! | 9, 10 | ρ³ cos 3θ, ρ³ sin 3θ | trefoil |
//! | 11, 12 | (4ρ² − 3)ρ² cos 2θ, (4ρ² − 3)ρ² sin 2θ | secondary astigmatism |
//! | 13, 14 | (10ρ⁴ − 12ρ² + 3)ρ cos θ, ... sin θ | secondary coma |
//! | 15 | 20ρ⁶ − 30ρ⁴ + 12ρ² − 1 | secondary spherical |
//! | 16, 17 | ρ⁴ cos 4θ, ρ⁴ sin 4θ | tetrafoil |
//! | 18 | (5ρ² − 4)ρ³ cos 3θ | secondary trefoil |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest Wyant index supported.
pub const MAX_INDEX: u32 = 18;
/// Range of indices allowed in aberration coefficient sets.
pub const ABERRATION_INDICES: std::ops::RangeInclusive<u32> = 4..=18;

/// Azimuthal order and angular function of a Wyant term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Angular {
    Radial,
    Cos(u32),
    Sin(u32),
}

/// Angular part of the Wyant term at `index`.
pub fn angular(index: u32) -> Result<Angular> {
    use Angular::*;
    Ok(match index {
        0 | 3 | 8 | 15 => Radial,
        1 | 6 | 13 => Cos(1),
        2 | 7 | 14 => Sin(1),
        4 | 11 => Cos(2),
        5 | 12 => Sin(2),
        9 | 18 => Cos(3),
        10 => Sin(3),
        16 => Cos(4),
        17 => Sin(4),
        _ => return Err(Error::InvalidIndex(index)),
    })
}

fn radial(index: u32, rho: f64) -> f64 {
    let r2 = rho * rho;
    match index {
        0 => 1.0,
        1 | 2 => rho,
        3 => 2.0 * r2 - 1.0,
        4 | 5 => r2,
        6 | 7 => (3.0 * r2 - 2.0) * rho,
        8 => 6.0 * r2 * r2 - 6.0 * r2 + 1.0,
        9 | 10 => r2 * rho,
        11 | 12 => (4.0 * r2 - 3.0) * r2,
        13 | 14 => (10.0 * r2 * r2 - 12.0 * r2 + 3.0) * rho,
        15 => ((20.0 * r2 - 30.0) * r2 + 12.0) * r2 - 1.0,
        16 | 17 => r2 * r2,
        18 => (5.0 * r2 - 4.0) * r2 * rho,
        _ => unreachable!("index validated by angular()"),
    }
}

/// Value of the Wyant-ordered Zernike polynomial `index` at polar pupil
/// coordinates `(rho, theta)`.
pub fn zernike_eval(index: u32, rho: f64, theta: f64) -> Result<f64> {
    let ang = angular(index)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "rho must lie in [0, 1], got {rho}"
        )));
    }
    Ok(eval_unchecked(index, ang, rho, theta))
}

#[inline]
pub(crate) fn eval_unchecked(index: u32, ang: Angular, rho: f64, theta: f64) -> f64 {
    let r = radial(index, rho);
    match ang {
        Angular::Radial => r,
        Angular::Cos(m) => r * (m as f64 * theta).cos(),
        Angular::Sin(m) => r * (m as f64 * theta).sin(),
    }
}

/// Sparse aberration amplitudes (micrometers) keyed by Wyant index 4..=18.
///
/// Absent indices carry zero amplitude. Serializes as a JSON object with
/// stringified integer keys in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>")]
pub struct ZernikeCoefficients {
    entries: BTreeMap<u32, f64>,
}

impl ZernikeCoefficients {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a coefficient set, rejecting out-of-range indices and
    /// non-finite amplitudes. Repeated indices accumulate.
    pub fn from_pairs<I: IntoIterator<Item = (u32, f64)>>(pairs: I) -> Result<Self> {
        let mut c = Self::new();
        for (index, amp) in pairs {
            let prev = c.get(index);
            c.set(index, prev + amp)?;
        }
        Ok(c)
    }

    /// Sets the amplitude for `index`. Zero amplitudes are not stored.
    pub fn set(&mut self, index: u32, amplitude: f64) -> Result<()> {
        if !ABERRATION_INDICES.contains(&index) {
            return Err(Error::InvalidIndex(index));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "amplitude for Z{index} is not finite"
            )));
        }
        if amplitude == 0.0 {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, amplitude);
        }
        Ok(())
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(|(&i, &a)| (i, a))
    }

    /// Indices with a nonzero amplitude.
    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let entries = self
            .iter()
            .map(|(i, a)| (i, a * factor))
            .filter(|&(_, a)| a != 0.0)
            .collect();
        Self { entries }
    }

    /// Wavefront value Σ aₙ Zₙ(ρ, θ) for a point inside the unit disk.
    pub fn evaluate(&self, rho: f64, theta: f64) -> f64 {
        self.iter()
            .map(|(i, a)| {
                let ang = angular(i).expect("indices validated on insert");
                a * eval_unchecked(i, ang, rho, theta)
            })
            .sum()
    }
}

impl TryFrom<BTreeMap<String, f64>> for ZernikeCoefficients {
    type Error = Error;

    fn try_from(map: BTreeMap<String, f64>) -> Result<Self> {
        let mut c = Self::new();
        for (k, v) in map {
            let index: u32 = k
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad Zernike index key {k:?}")))?;
            c.set(index, v)?;
        }
        Ok(c)
    }
}

impl Serialize for ZernikeCoefficients {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        // numeric key order, not the lexical order a String-keyed map would give
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(&k.to_string(), v)?;
        }
        map.end()
    }
}

/// Real wavefront (micrometers) sampled on a square grid of normalized pupil
/// coordinates; zero outside the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefrontMap {
    pub size: usize,
    pub values: Vec<f64>,
}

impl WavefrontMap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }
}

/// Samples Σ aₙZₙ on a `grid`×`grid` lattice where pixel `(r, c)` sits at
/// normalized coordinates `((c - grid/2) / radius, (r - grid/2) / radius)`.
pub(crate) fn sample_wavefront(
    coeffs: &ZernikeCoefficients,
    grid: usize,
    radius_px: f64,
) -> Vec<f64> {
    let half = (grid / 2) as f64;
    let terms: Vec<(u32, Angular, f64)> = coeffs
        .iter()
        .map(|(i, a)| (i, angular(i).expect("validated"), a))
        .collect();
    let mut out = vec![0.0; grid * grid];
    if terms.is_empty() {
        return out;
    }
    for r in 0..grid {
        let y = (r as f64 - half) / radius_px;
        for c in 0..grid {
            let x = (c as f64 - half) / radius_px;
            let rho = (x * x + y * y).sqrt();
            if rho > 1.0 {
                continue;
            }
            let theta = y.atan2(x);
            out[r * grid + c] = terms
                .iter()
                .map(|&(i, ang, a)| a * eval_unchecked(i, ang, rho, theta))
                .sum();
        }
    }
    out
}

/// Wavefront map over the unit pupil inscribed in a `grid`×`grid` square.
pub fn wavefront(coeffs: &ZernikeCoefficients, grid: usize) -> Result<WavefrontMap> {
    if grid < 32 {
        return Err(Error::InvalidArgument(format!(
            "wavefront grid must be at least 32, got {grid}"
        )));
    }
    Ok(WavefrontMap {
        size: grid,
        values: sample_wavefront(coeffs, grid, (grid / 2) as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn piston_is_constant() {
        for &(r, t) in &[(0.0, 0.0), (0.3, 1.0), (1.0, -2.0)] {
            assert_eq!(zernike_eval(0, r, t).unwrap(), 1.0);
        }
    }

    #[test]
    fn spot_values() {
        assert_eq!(zernike_eval(8, 0.0, 0.0).unwrap(), 1.0);
        assert!(zernike_eval(4, 1.0, PI / 4.0).unwrap().abs() < 1e-15);
        assert!((zernike_eval(9, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn index_out_of_range() {
        assert!(matches!(
            zernike_eval(19, 0.5, 0.0),
            Err(Error::InvalidIndex(19))
        ));
        assert!(zernike_eval(3, 1.5, 0.0).is_err());
    }

    #[test]
    fn unit_peak_on_pupil_edge() {
        // every term reaches 1 at rho = 1 along its own angular maximum
        for i in 0..=MAX_INDEX {
            let theta = match angular(i).unwrap() {
                Angular::Radial | Angular::Cos(_) => 0.0,
                Angular::Sin(m) => PI / (2.0 * m as f64),
            };
            let v = zernike_eval(i, 1.0, theta).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "Z{i} = {v}");
        }
    }

    #[test]
    fn coefficients_reject_bad_index() {
        let mut c = ZernikeCoefficients::new();
        assert!(c.set(3, 1.0).is_err());
        assert!(c.set(19, 1.0).is_err());
        assert!(c.set(4, f64::NAN).is_err());
        c.set(4, 0.6).unwrap();
        assert_eq!(c.get(4), 0.6);
        assert_eq!(c.get(5), 0.0);
    }

    #[test]
    fn json_keys_are_ascending_integers() {
        let c = ZernikeCoefficients::from_pairs([(10, 1.0), (9, 1.0), (4, 0.5)]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"4":0.5,"9":1.0,"10":1.0}"#);
        let back: ZernikeCoefficients = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ZernikeCoefficients>(r#"{"2": 1.0}"#).is_err());
    }

    #[test]
    fn empty_wavefront_is_zero() {
        let w = wavefront(&ZernikeCoefficients::new(), 32).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
        assert!(wavefront(&ZernikeCoefficients::new(), 16).is_err());
    }

    #[test]
    fn wavefront_is_linear() {
        let a = ZernikeCoefficients::from_pairs([(4, 0.3), (8, -0.2), (13, 0.1)]).unwrap();
        let w1 = wavefront(&a, 64).unwrap();
        let w2 = wavefront(&a.scaled(2.0), 64).unwrap();
        for (x, y) in w1.values.iter().zip(&w2.values) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn wavefront_matches_pointwise_eval() {
        use rand::{Rng, SeedableRng};
        let c = ZernikeCoefficients::from_pairs([(4, 0.6)]).unwrap();
        let grid = 64;
        let w = wavefront(&c, grid).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 10 {
            let r = rng.random_range(0..grid);
            let col = rng.random_range(0..grid);
            let x = (col as f64 - 32.0) / 32.0;
            let y = (r as f64 - 32.0) / 32.0;
            let rho = (x * x + y * y).sqrt();
            if rho > 1.0 {
                assert_eq!(w.at(r, col), 0.0);
                continue;
            }
            let expect = 0.6 * zernike_eval(4, rho, y.atan2(x)).unwrap();
            assert!((w.at(r, col) - expect).abs() < 1e-12);
            checked += 1;
        }
    }
}
