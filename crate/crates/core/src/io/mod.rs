//! On-disk formats: PFM float maps, PGM label masks, PPM overlays, point
//! CSVs, JSON documents and the pipeline configuration.

mod config;
mod netpbm;
mod pfm;
mod points;
mod report;

pub use config::PipelineConfig;
pub use netpbm::{decode_pgm, decode_ppm, encode_pgm, encode_ppm, RgbImage};
pub use pfm::{decode_pfm, encode_pfm, FloatMap};
pub use points::{decode_csv, encode_csv, BoardCorrespondence, CsvRecord};
pub use report::{report_from_json, report_pairs_from_json, report_to_json, to_sorted_json};

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::calibration::{ControlPoint, RawSlamPoint};
use crate::maps::{InstanceMask, InverseDepthMap, MapError, MetricDepthMap};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: u64, got: u64 },
    #[error("{0} unexpected bytes after the payload")]
    TrailingBytes(usize),
    #[error("non-finite value at pixel ({u}, {v})")]
    NonFiniteValue { u: u32, v: u32 },
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("label {0} does not fit in 8 bits")]
    LabelOverflow(u32),
    #[error("line {line}: expected {expected} columns, got {got}")]
    SchemaMismatch {
        line: u64,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_pfm(path: &Path) -> Result<FloatMap, FormatError> {
    decode_pfm(&read_bytes(path)?)
}

pub fn write_pfm(path: &Path, map: &FloatMap) -> Result<(), FormatError> {
    write_bytes(path, &encode_pfm(map))
}

pub fn read_inverse_depth(path: &Path) -> Result<InverseDepthMap, FormatError> {
    Ok(read_pfm(path)?.to_inverse_depth()?)
}

pub fn read_metric_depth(path: &Path) -> Result<MetricDepthMap, FormatError> {
    Ok(read_pfm(path)?.to_metric_depth()?)
}

pub fn read_label_mask(path: &Path) -> Result<InstanceMask, FormatError> {
    decode_pgm(&read_bytes(path)?)
}

pub fn write_label_mask(path: &Path, mask: &InstanceMask) -> Result<(), FormatError> {
    write_bytes(path, &encode_pgm(mask)?)
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<(), FormatError> {
    write_bytes(path, &encode_ppm(img))
}

pub fn read_points_csv<T: CsvRecord>(path: &Path) -> Result<Vec<T>, FormatError> {
    decode_csv(&read_bytes(path)?)
}

pub fn write_points_csv<T: CsvRecord>(path: &Path, rows: &[T]) -> Result<(), FormatError> {
    write_bytes(path, encode_csv(rows).as_bytes())
}

pub fn read_control_points(path: &Path) -> Result<Vec<ControlPoint>, FormatError> {
    read_points_csv(path)
}

pub fn read_slam_points(path: &Path) -> Result<Vec<RawSlamPoint>, FormatError> {
    read_points_csv(path)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

/// Writes `value` as pretty, key-sorted JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut s = to_sorted_json(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}
