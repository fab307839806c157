//! Binary PGM (`P5`) label masks and PPM (`P6`) color images, 8 bits per
//! sample. `#` comments are accepted between header tokens.

use super::FormatError;
use crate::maps::{InstanceMask, MapError};

/// 8-bit RGB raster, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![color; width as usize * height as usize],
        }
    }

    pub fn new(width: u32, height: u32, data: Vec<[u8; 3]>) -> Result<Self, MapError> {
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

    pub fn get(&self, u: u32, v: u32) -> [u8; 3] {
        self.data[v as usize * self.width as usize + u as usize]
    }

    /// Writes a pixel; coordinates outside the image are ignored.
    pub fn put(&mut self, u: i64, v: i64, color: [u8; 3]) {
        if u >= 0 && v >= 0 && u < self.width as i64 && v < self.height as i64 {
            self.data[v as usize * self.width as usize + u as usize] = color;
        }
    }
}

struct Header {
    width: u32,
    height: u32,
    maxval: u32,
    payload_start: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header, FormatError> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(FormatError::MalformedHeader(format!(
            "missing {} magic",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        skip_space_and_comments(bytes, &mut pos);
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() && pos - start < 10 {
            pos += 1;
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        let value: u32 = tok
            .parse()
            .map_err(|_| FormatError::MalformedHeader(format!("invalid {name}")))?;
        fields[i] = value;
        if pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            return Err(FormatError::MalformedHeader(format!("invalid {name}")));
        }
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(FormatError::MalformedHeader("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(FormatError::MalformedHeader(format!(
            "maxval {maxval} unsupported, only 8-bit samples are read"
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(FormatError::MalformedHeader(
                "header must end with a whitespace byte".into(),
            ))
        }
    }
    Ok(Header {
        width,
        height,
        maxval,
        payload_start: pos,
    })
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn payload<'a>(bytes: &'a [u8], h: &Header, channels: u64) -> Result<&'a [u8], FormatError> {
    let expected = (h.width as u64 * h.height as u64)
        .checked_mul(channels)
        .ok_or_else(|| FormatError::MalformedHeader("image too large".into()))?;
    let got = (bytes.len() - h.payload_start) as u64;
    if got < expected {
        return Err(FormatError::TruncatedPayload { expected, got });
    }
    if got > expected {
        return Err(FormatError::TrailingBytes((got - expected) as usize));
    }
    let data = &bytes[h.payload_start..];
    if let Some(i) = data.iter().position(|&b| b as u32 > h.maxval) {
        return Err(FormatError::MalformedPayload(format!(
            "sample {} at byte {} exceeds maxval {}",
            data[i], i, h.maxval
        )));
    }
    Ok(data)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<InstanceMask, FormatError> {
    let h = parse_header(bytes, b"P5")?;
    let data = payload(bytes, &h, 1)?;
    Ok(InstanceMask::new(
        h.width,
        h.height,
        data.iter().map(|&b| b as u32).collect(),
    )?)
}

pub fn encode_pgm(mask: &InstanceMask) -> Result<Vec<u8>, FormatError> {
    if let Some(&l) = mask.labels().iter().find(|&&l| l > 255) {
        return Err(FormatError::LabelOverflow(l));
    }
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.labels().iter().map(|&l| l as u8));
    Ok(out)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, FormatError> {
    let h = parse_header(bytes, b"P6")?;
    let data = payload(bytes, &h, 3)?;
    Ok(RgbImage {
        width: h.width,
        height: h.height,
        data: data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    })
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for px in &img.data {
        out.extend_from_slice(px);
    }
    out
}
