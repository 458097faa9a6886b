//! JSON Lines dataset manifests.
//!
//! One record per line with keys in a fixed order: `path`, `category`,
//! `aberration_type`, `amplitude_class` (number or null), `coefficients`,
//! `item_seed` (decimal string), `undersampled`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::label::{AberrationLabel, AberrationType, AmplitudeLevel, Category};
use crate::error::{Error, Result};
use crate::optics::ZernikeCoefficients;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub label: AberrationLabel,
    pub coefficients: ZernikeCoefficients,
    pub item_seed: u64,
    pub undersampled: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub base_seed: u64,
    pub records: Vec<ManifestRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    path: String,
    category: Category,
    aberration_type: AberrationType,
    amplitude_class: Option<f64>,
    coefficients: ZernikeCoefficients,
    item_seed: String,
    undersampled: bool,
}

impl ManifestRecord {
    pub fn to_json_line(&self) -> Result<String> {
        let line = Line {
            path: self.path.clone(),
            category: self.label.category(),
            aberration_type: self.label.aberration_type(),
            amplitude_class: self.label.amplitude().map(|a| a.value()),
            coefficients: self.coefficients.clone(),
            item_seed: self.item_seed.to_string(),
            undersampled: self.undersampled,
        };
        Ok(serde_json::to_string(&line)?)
    }

    pub fn from_json_line(s: &str) -> Result<Self> {
        let line: Line = serde_json::from_str(s)?;
        let amplitude = match line.amplitude_class {
            None => None,
            Some(v) => Some(AmplitudeLevel::from_value(v).ok_or_else(|| {
                Error::InvalidArgument(format!("amplitude_class {v} is not a labeled level"))
            })?),
        };
        let label = AberrationLabel::new(line.category, line.aberration_type, amplitude)?;
        let item_seed = line
            .item_seed
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad item_seed {:?}", line.item_seed)))?;
        Ok(Self {
            path: line.path,
            label,
            coefficients: line.coefficients,
            item_seed,
            undersampled: line.undersampled,
        })
    }

    /// Coefficients only touch the indices implied by the label.
    pub fn coefficients_consistent(&self) -> bool {
        let t = self.label.aberration_type();
        let allowed = |i: u32| match (t.single(), t.mixed()) {
            (Some(s), _) => s.indices().contains(&i),
            (_, Some(r)) => r.indices().contains(&i),
            _ => false,
        };
        self.coefficients.indices().all(allowed)
    }
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks unique item seeds and label/coefficient consistency.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            if !seen.insert(r.item_seed) {
                return Err(Error::InvalidArgument(format!(
                    "record {i}: duplicate item seed {}",
                    r.item_seed
                )));
            }
            if !r.coefficients_consistent() {
                return Err(Error::InvalidArgument(format!(
                    "record {i}: coefficients {:?} inconsistent with {}",
                    r.coefficients,
                    r.label.aberration_type()
                )));
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_json_line()?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                ManifestRecord::from_json_line(l)
                    .map_err(|e| Error::InvalidArgument(format!("manifest line {}: {e}", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base_seed: 0,
            records,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}
