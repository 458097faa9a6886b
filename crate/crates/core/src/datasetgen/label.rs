use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Single,
    Mixed,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Single, Category::Mixed];

    pub fn class_index(self) -> usize {
        self as usize
    }

    pub fn from_class_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Single aberration families, each driving a fixed set of Wyant indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SingleType {
    Astigmatism,
    Coma,
    Spherical,
    Trefoil,
}

impl SingleType {
    pub const ALL: [SingleType; 4] = [
        SingleType::Astigmatism,
        SingleType::Coma,
        SingleType::Spherical,
        SingleType::Trefoil,
    ];

    pub fn indices(self) -> &'static [u32] {
        match self {
            SingleType::Astigmatism => &[4, 5],
            SingleType::Coma => &[6, 7],
            SingleType::Spherical => &[8],
            SingleType::Trefoil => &[9, 10],
        }
    }
}

impl FromStr for SingleType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "astigmatism" => Ok(SingleType::Astigmatism),
            "coma" => Ok(SingleType::Coma),
            "spherical" => Ok(SingleType::Spherical),
            "trefoil" => Ok(SingleType::Trefoil),
            _ => Err(Error::InvalidArgument(format!(
                "unknown aberration type {s:?}"
            ))),
        }
    }
}

/// Contiguous Wyant index ranges used for mixed aberrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MixedRange {
    R4_6,
    R4_8,
    R4_13,
    R4_18,
}

impl MixedRange {
    pub const ALL: [MixedRange; 4] = [
        MixedRange::R4_6,
        MixedRange::R4_8,
        MixedRange::R4_13,
        MixedRange::R4_18,
    ];

    pub fn upper(self) -> u32 {
        match self {
            MixedRange::R4_6 => 6,
            MixedRange::R4_8 => 8,
            MixedRange::R4_13 => 13,
            MixedRange::R4_18 => 18,
        }
    }

    pub fn indices(self) -> std::ops::RangeInclusive<u32> {
        4..=self.upper()
    }
}

impl FromStr for MixedRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4-6" | "4_6" => Ok(MixedRange::R4_6),
            "4-8" | "4_8" => Ok(MixedRange::R4_8),
            "4-13" | "4_13" => Ok(MixedRange::R4_13),
            "4-18" | "4_18" => Ok(MixedRange::R4_18),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mixed order range {s:?}"
            ))),
        }
    }
}

/// The eight aberration-type classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AberrationType {
    Astigmatism,
    Coma,
    Spherical,
    Trefoil,
    #[serde(rename = "Mixed4_6")]
    Mixed4To6,
    #[serde(rename = "Mixed4_8")]
    Mixed4To8,
    #[serde(rename = "Mixed4_13")]
    Mixed4To13,
    #[serde(rename = "Mixed4_18")]
    Mixed4To18,
}

impl AberrationType {
    pub const ALL: [AberrationType; 8] = [
        AberrationType::Astigmatism,
        AberrationType::Coma,
        AberrationType::Spherical,
        AberrationType::Trefoil,
        AberrationType::Mixed4To6,
        AberrationType::Mixed4To8,
        AberrationType::Mixed4To13,
        AberrationType::Mixed4To18,
    ];

    pub fn class_index(self) -> usize {
        self as usize
    }

    pub fn from_class_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn category(self) -> Category {
        if self.class_index() < 4 {
            Category::Single
        } else {
            Category::Mixed
        }
    }

    pub fn single(self) -> Option<SingleType> {
        SingleType::ALL.get(self.class_index()).copied()
    }

    pub fn mixed(self) -> Option<MixedRange> {
        self.class_index()
            .checked_sub(4)
            .and_then(|i| MixedRange::ALL.get(i).copied())
    }

    pub fn name(self) -> &'static str {
        match self {
            AberrationType::Astigmatism => "Astigmatism",
            AberrationType::Coma => "Coma",
            AberrationType::Spherical => "Spherical",
            AberrationType::Trefoil => "Trefoil",
            AberrationType::Mixed4To6 => "Mixed4_6",
            AberrationType::Mixed4To8 => "Mixed4_8",
            AberrationType::Mixed4To13 => "Mixed4_13",
            AberrationType::Mixed4To18 => "Mixed4_18",
        }
    }
}

impl From<SingleType> for AberrationType {
    fn from(t: SingleType) -> Self {
        AberrationType::ALL[t as usize]
    }
}

impl From<MixedRange> for AberrationType {
    fn from(r: MixedRange) -> Self {
        AberrationType::ALL[4 + r as usize]
    }
}

impl fmt::Display for AberrationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The eight labeled amplitude levels in micrometers.
pub const AMPLITUDE_LEVELS: [f64; 8] = [0.05, 0.1, 0.15, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Index into [`AMPLITUDE_LEVELS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AmplitudeLevel(u8);

impl AmplitudeLevel {
    pub fn new(index: usize) -> Option<Self> {
        (index < AMPLITUDE_LEVELS.len()).then_some(Self(index as u8))
    }

    pub fn all() -> impl Iterator<Item = AmplitudeLevel> {
        (0..AMPLITUDE_LEVELS.len()).map(|i| Self(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn value(self) -> f64 {
        AMPLITUDE_LEVELS[self.index()]
    }

    /// Exact match against the level grid, tolerant to float noise.
    pub fn from_value(v: f64) -> Option<Self> {
        AMPLITUDE_LEVELS
            .iter()
            .position(|&l| (l - v).abs() < 1e-9)
            .map(|i| Self(i as u8))
    }
}

/// Amplitude-head width: eight levels plus `None` for mixed aberrations.
pub const AMPLITUDE_CLASSES: usize = AMPLITUDE_LEVELS.len() + 1;

/// (category, aberration type, amplitude class) triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AberrationLabel {
    category: Category,
    aberration_type: AberrationType,
    amplitude: Option<AmplitudeLevel>,
}

impl AberrationLabel {
    pub fn single(t: SingleType, level: AmplitudeLevel) -> Self {
        Self {
            category: Category::Single,
            aberration_type: t.into(),
            amplitude: Some(level),
        }
    }

    pub fn mixed(r: MixedRange) -> Self {
        Self {
            category: Category::Mixed,
            aberration_type: r.into(),
            amplitude: None,
        }
    }

    /// Validating constructor: Mixed ⇔ mixed type ⇔ no amplitude.
    pub fn new(
        category: Category,
        aberration_type: AberrationType,
        amplitude: Option<AmplitudeLevel>,
    ) -> Result<Self> {
        let mixed_type = aberration_type.category() == Category::Mixed;
        let is_mixed = category == Category::Mixed;
        if is_mixed != mixed_type || is_mixed != amplitude.is_none() {
            return Err(Error::InvalidArgument(format!(
                "inconsistent label: {category:?}/{aberration_type}/{amplitude:?}"
            )));
        }
        Ok(Self {
            category,
            aberration_type,
            amplitude,
        })
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn aberration_type(&self) -> AberrationType {
        self.aberration_type
    }

    pub fn amplitude(&self) -> Option<AmplitudeLevel> {
        self.amplitude
    }

    /// Amplitude-head class; `None` maps to the last class.
    pub fn amplitude_class_index(&self) -> usize {
        self.amplitude
            .map(|a| a.index())
            .unwrap_or(AMPLITUDE_LEVELS.len())
    }

    /// Class indices for the (category, type, amplitude) heads.
    pub fn class_indices(&self) -> [usize; 3] {
        [
            self.category.class_index(),
            self.aberration_type.class_index(),
            self.amplitude_class_index(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(Category::ALL.len(), 2);
        assert_eq!(AberrationType::ALL.len(), 8);
        assert_eq!(AMPLITUDE_CLASSES, 9);
    }

    #[test]
    fn invariant_enforced() {
        let l4 = AmplitudeLevel::new(4).unwrap();
        assert!(AberrationLabel::new(Category::Single, AberrationType::Coma, Some(l4)).is_ok());
        assert!(AberrationLabel::new(Category::Mixed, AberrationType::Coma, None).is_err());
        assert!(
            AberrationLabel::new(Category::Mixed, AberrationType::Mixed4To8, Some(l4)).is_err()
        );
        assert!(AberrationLabel::new(Category::Single, AberrationType::Spherical, None).is_err());
        let m = AberrationLabel::mixed(MixedRange::R4_13);
        assert_eq!(m.class_indices(), [1, 6, 8]);
    }

    #[test]
    fn type_roundtrips() {
        for t in AberrationType::ALL {
            assert_eq!(AberrationType::from_class_index(t.class_index()), Some(t));
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
        for s in SingleType::ALL {
            assert_eq!(AberrationType::from(s).single(), Some(s));
        }
        for r in MixedRange::ALL {
            assert_eq!(AberrationType::from(r).mixed(), Some(r));
        }
    }

    #[test]
    fn level_lookup() {
        assert_eq!(AmplitudeLevel::from_value(0.15).unwrap().index(), 2);
        assert_eq!(AmplitudeLevel::from_value(0.4 + 1e-12).unwrap().index(), 4);
        assert!(AmplitudeLevel::from_value(0.43).is_none());
    }
}
