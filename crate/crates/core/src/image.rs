//! Grayscale images and their on-disk formats.
//!
//! Two formats are read and written: 8/16-bit single-channel PNG, and a raw
//! float grid (`ABSIMF32` magic, little-endian `u32` width and height, then
//! `width*height` little-endian `f32` values in row-major order).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{ColorType, ImageBuffer, ImageReader, Luma};

use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 8] = b"ABSIMF32";
const PNG_MAGIC: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// Quantization of the file an image came from (or will be written to).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
    Float32,
}

impl BitDepth {
    pub fn max_value(self) -> Option<f64> {
        match self {
            BitDepth::Eight => Some(255.0),
            BitDepth::Sixteen => Some(65535.0),
            BitDepth::Float32 => None,
        }
    }
}

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
    pub bit_depth: BitDepth,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "image dimensions must be >= 1".into(),
            ));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidArgument(format!(
                "intensity {v} at index {i} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            bit_depth: BitDepth::Sixteen,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from a function of `(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn with_bit_depth(mut self, depth: BitDepth) -> Self {
        self.bit_depth = depth;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_dims(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Pixelwise `1 - v`.
    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            data: self.data.iter().map(|v| 1.0 - v).collect(),
            ..self.clone()
        }
    }
}

fn read_prefix(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads a PNG (8- or 16-bit, single channel) or raw float grid.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = read_prefix(path)?;
    if bytes.len() >= 8 && &bytes[..8] == RAW_MAGIC {
        let (w, h, values) = decode_raw(&bytes, path)?;
        let data: Vec<f64> = values.into_iter().map(f64::from).collect();
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Corrupt {
                path: path.into(),
                offset: 16 + 4 * i as u64,
                reason: format!("value {} outside [0, 1]", data[i]),
            });
        }
        return Ok(GrayImage::new(w, h, data)?.with_bit_depth(BitDepth::Float32));
    }
    if bytes.len() < 8 || &bytes[..8] != PNG_MAGIC {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: "neither PNG nor ABSIMF32 signature at offset 0".into(),
        });
    }
    let img = ImageReader::with_format(std::io::Cursor::new(&bytes), image::ImageFormat::Png)
        .decode()
        .map_err(|e| Error::Codec {
            path: path.into(),
            source: e,
        })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ColorType::L8 => {
            let buf = img.into_luma8();
            let data = buf.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Ok(GrayImage::new(w, h, data)?.with_bit_depth(BitDepth::Eight))
        }
        ColorType::L16 => {
            let buf = img.into_luma16();
            let data = buf.as_raw().iter().map(|&v| v as f64 / 65535.0).collect();
            Ok(GrayImage::new(w, h, data)?.with_bit_depth(BitDepth::Sixteen))
        }
        other => Err(Error::ChannelCount {
            path: path.into(),
            channels: other.channel_count(),
        }),
    }
}

/// Writes `image` in the format implied by its bit depth: PNG for 8/16-bit,
/// raw float grid for `Float32`.
pub fn save_image(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (image.width as u32, image.height as u32);
    match image.bit_depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = image
                .data
                .iter()
                .map(|v| (v * 255.0).round() as u8)
                .collect();
            let buf: ImageBuffer<Luma<u8>, _> =
                ImageBuffer::from_raw(w, h, raw).expect("buffer sized to dims");
            buf.save(path).map_err(|e| Error::Codec {
                path: path.into(),
                source: e,
            })
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = image
                .data
                .iter()
                .map(|v| (v * 65535.0).round() as u16)
                .collect();
            let buf: ImageBuffer<Luma<u16>, _> =
                ImageBuffer::from_raw(w, h, raw).expect("buffer sized to dims");
            buf.save(path).map_err(|e| Error::Codec {
                path: path.into(),
                source: e,
            })
        }
        BitDepth::Float32 => {
            let values: Vec<f32> = image.data.iter().map(|&v| v as f32).collect();
            write_raw(path, image.width, image.height, &values)
        }
    }
}

/// Writes a raw float grid.
pub fn write_raw(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    values: &[f32],
) -> Result<()> {
    let path = path.as_ref();
    assert_eq!(values.len(), width * height);
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |b: &[u8]| w.write_all(b).map_err(|e| Error::io(path, e));
    write(RAW_MAGIC)?;
    write(&(width as u32).to_le_bytes())?;
    write(&(height as u32).to_le_bytes())?;
    let mut body = Vec::with_capacity(values.len() * 4);
    for v in values {
        body.extend_from_slice(&v.to_le_bytes());
    }
    write(&body)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a raw float grid, returning `(width, height, values)`.
pub fn read_raw(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    let path = path.as_ref();
    let bytes = read_prefix(path)?;
    decode_raw(&bytes, path)
}

fn decode_raw(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let corrupt = |offset: u64, reason: String| Error::Corrupt {
        path: path.into(),
        offset,
        reason,
    };
    if bytes.len() < 8 || &bytes[..8] != RAW_MAGIC {
        return Err(corrupt(0, "missing ABSIMF32 magic".into()));
    }
    if bytes.len() < 16 {
        return Err(corrupt(bytes.len() as u64, "truncated header".into()));
    }
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if w == 0 || h == 0 {
        return Err(corrupt(8, format!("zero dimension {w}x{h}")));
    }
    let expected = 16 + 4 * w * h;
    if bytes.len() != expected {
        return Err(corrupt(
            bytes.len().min(expected) as u64,
            format!(
                "expected {expected} bytes for {w}x{h}, found {}",
                bytes.len()
            ),
        ));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(corrupt(16 + 4 * i as u64, "non-finite value".into()));
    }
    Ok((w, h, values))
}
