//! Model checkpoints: `ABSIMNN1`, a little-endian `u32` header length, a
//! JSON header, then every parameter as little-endian `f64` in layout order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{layout, ClassifierModel, TensorInfo, CHANNELS, HEADS};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ABSIMNN1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub version: u32,
    pub input_size: usize,
    pub channels: Vec<usize>,
    pub heads: Vec<usize>,
    pub tensors: Vec<TensorInfo>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
}

pub fn encode_checkpoint(model: &ClassifierModel, train: Option<&TrainConfig>) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        input_size: model.input_size(),
        channels: CHANNELS.to_vec(),
        heads: HEADS.to_vec(),
        tensors: model.layout().to_vec(),
        train: train.cloned(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + 8 * model.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn save_checkpoint(
    model: &ClassifierModel,
    train: Option<&TrainConfig>,
    path: &Path,
) -> Result<()> {
    let bytes = encode_checkpoint(model, train)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<(ClassifierModel, CheckpointHeader)> {
    let corrupt = |offset: usize, reason: String| Error::Corrupt {
        path: path.into(),
        offset: offset as u64,
        reason,
    };
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: "missing ABSIMNN1 magic".into(),
        });
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = 12 + hlen;
    if bytes.len() < body {
        return Err(corrupt(bytes.len(), format!("header needs {hlen} bytes")));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..body]).map_err(|e| {
        corrupt(
            12 + e.column().saturating_sub(1),
            format!("bad header: {e}"),
        )
    })?;
    if header.version != CHECKPOINT_VERSION {
        return Err(corrupt(
            12,
            format!("unsupported checkpoint version {}", header.version),
        ));
    }
    let expected = layout();
    let shapes_match = header.channels == CHANNELS
        && header.heads == HEADS
        && header.tensors.len() == expected.len()
        && header
            .tensors
            .iter()
            .zip(&expected)
            .all(|(a, b)| a.name == b.name && a.shape == b.shape);
    if !shapes_match {
        return Err(corrupt(
            12,
            "tensor layout does not match this model".into(),
        ));
    }
    let count: usize = expected.iter().map(|t| t.len()).sum();
    let data = &bytes[body..];
    if data.len() != 8 * count {
        return Err(corrupt(
            body + data.len().min(8 * count),
            format!(
                "expected {} parameter bytes, found {}",
                8 * count,
                data.len()
            ),
        ));
    }
    let params = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let model = ClassifierModel::from_parts(header.input_size, params)?;
    Ok((model, header))
}

pub fn load_checkpoint(path: &Path) -> Result<(ClassifierModel, CheckpointHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let m = ClassifierModel::new(64, 11).unwrap();
        let cfg = TrainConfig::default();
        let bytes = encode_checkpoint(&m, Some(&cfg)).unwrap();
        assert_eq!(&bytes[..8], b"ABSIMNN1");
        let (back, header) = decode_checkpoint(&bytes, Path::new("m.bin")).unwrap();
        assert_eq!(back, m);
        assert_eq!(header.train, Some(cfg));
    }

    #[test]
    fn truncation_reports_offset() {
        let m = ClassifierModel::new(16, 11).unwrap();
        let bytes = encode_checkpoint(&m, None).unwrap();
        let err = decode_checkpoint(&bytes[..bytes.len() - 3], Path::new("m.bin")).unwrap_err();
        assert!(matches!(err, Error::Corrupt { .. }), "{err}");
        let err = decode_checkpoint(b"NOTAMODELFILE", Path::new("m.bin")).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat { .. }));
    }
}
