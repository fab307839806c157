//! Grayscale PFM (`Pf`) reader and writer.
//!
//! Header: `Pf`, then `width height`, then a scale whose sign selects the
//! payload byte order (negative = little-endian). The payload stores rows
//! bottom to top as 32-bit floats. The writer always emits little-endian
//! with scale `-1.0`.

use super::FormatError;
use crate::maps::{InverseDepthMap, MapError, MetricDepthMap};

/// A single-channel float raster, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl FloatMap {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self, MapError> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(MapError::SizeMismatch {
                width,
                height,
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn to_inverse_depth(&self) -> Result<InverseDepthMap, MapError> {
        InverseDepthMap::new(
            self.width,
            self.height,
            self.data.iter().map(|&x| x as f64).collect(),
        )
    }

    /// Non-positive values become invalid depth.
    pub fn to_metric_depth(&self) -> Result<MetricDepthMap, MapError> {
        MetricDepthMap::new(
            self.width,
            self.height,
            self.data.iter().map(|&x| x as f64).collect(),
        )
    }

    pub fn from_inverse_depth(m: &InverseDepthMap) -> Self {
        Self {
            width: m.width(),
            height: m.height(),
            data: m.values().iter().map(|&x| x as f32).collect(),
        }
    }

    /// Invalid pixels are written as `0.0`.
    pub fn from_metric_depth(m: &MetricDepthMap) -> Self {
        Self {
            width: m.width(),
            height: m.height(),
            data: m.values().iter().map(|&x| x as f32).collect(),
        }
    }
}

pub fn encode_pfm(map: &FloatMap) -> Vec<u8> {
    let header = format!("Pf\n{} {}\n-1.0\n", map.width, map.height);
    let mut out = Vec::with_capacity(header.len() + map.data.len() * 4);
    out.extend_from_slice(header.as_bytes());
    let w = map.width as usize;
    for row in map.data.chunks(w.max(1)).rev() {
        for x in row {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<FloatMap, FormatError> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    match magic {
        b"Pf" => {}
        b"PF" => {
            return Err(FormatError::MalformedHeader(
                "color PFM (PF) is not supported".into(),
            ))
        }
        _ => return Err(FormatError::MalformedHeader("missing Pf magic".into())),
    }
    let width = parse_dim(next_token(bytes, &mut pos)?, "width")?;
    let height = parse_dim(next_token(bytes, &mut pos)?, "height")?;
    let scale_tok = next_token(bytes, &mut pos)?;
    let scale: f32 = std::str::from_utf8(scale_tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|s: &f32| s.is_finite() && *s != 0.0)
        .ok_or_else(|| FormatError::MalformedHeader("invalid scale".into()))?;
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(FormatError::MalformedHeader(
                "header must end with a whitespace byte".into(),
            ))
        }
    }
    let little_endian = scale < 0.0;

    let expected = (width as u64 * height as u64)
        .checked_mul(4)
        .ok_or_else(|| FormatError::MalformedHeader("image too large".into()))?;
    let got = (bytes.len() - pos) as u64;
    if got < expected {
        return Err(FormatError::TruncatedPayload { expected, got });
    }
    if got > expected {
        return Err(FormatError::TrailingBytes((got - expected) as usize));
    }
    let payload = &bytes[pos..];
    let (w, h) = (width as usize, height as usize);
    let mut data = vec![0f32; w * h];
    for (file_row, chunk) in payload.chunks_exact(w * 4).enumerate() {
        let row = h - 1 - file_row;
        for (u, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            let x = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            if !x.is_finite() {
                return Err(FormatError::NonFiniteValue {
                    u: u as u32,
                    v: row as u32,
                });
            }
            data[row * w + u] = x;
        }
    }
    Ok(FloatMap {
        width,
        height,
        data,
    })
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], FormatError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && *pos - start < 64 {
        *pos += 1;
    }
    if start == *pos {
        return Err(FormatError::MalformedHeader("unexpected end of header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_dim(tok: &[u8], what: &str) -> Result<u32, FormatError> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<u32>().ok())
        .filter(|d| *d > 0)
        .ok_or_else(|| FormatError::MalformedHeader(format!("invalid {what}")))
}
