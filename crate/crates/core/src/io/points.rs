//! Comma-separated point lists. Every column is numeric; an optional header
//! row naming the columns may precede the data and `#` starts a comment line.
//! Values are written in shortest round-trip form.

use csv::{ByteRecord, ReaderBuilder, Trim};

use super::FormatError;
use crate::baseline::GroundCorrespondence;
use crate::calibration::{ControlPoint, RawSlamPoint};
use crate::geometry::{Pixel, Point3};
use crate::maps::GridPixel;

/// A row type with a fixed numeric column schema.
pub trait CsvRecord: Sized {
    const COLUMNS: &'static [&'static str];

    /// `fields` has exactly `COLUMNS.len()` entries.
    fn from_fields(fields: &[f64]) -> Result<Self, String>;

    fn to_fields(&self) -> Vec<f64>;
}

/// A calibration-board corner: board-frame coordinates and its pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardCorrespondence {
    pub world: Point3,
    pub pixel: Pixel,
}

fn grid_coord(x: f64, name: &str) -> Result<u32, String> {
    if x.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&x) {
        Ok(x as u32)
    } else {
        Err(format!("{name} must be a non-negative integer, got {x}"))
    }
}

impl CsvRecord for RawSlamPoint {
    const COLUMNS: &'static [&'static str] = &["u", "v", "depth_m", "confidence"];

    fn from_fields(f: &[f64]) -> Result<Self, String> {
        RawSlamPoint::new(Pixel::new(f[0], f[1]), f[2], f[3]).map_err(|e| e.to_string())
    }

    fn to_fields(&self) -> Vec<f64> {
        vec![self.pixel.u, self.pixel.v, self.depth, self.confidence]
    }
}

impl CsvRecord for ControlPoint {
    const COLUMNS: &'static [&'static str] = &["u", "v", "depth_m"];

    fn from_fields(f: &[f64]) -> Result<Self, String> {
        let px = GridPixel::new(grid_coord(f[0], "u")?, grid_coord(f[1], "v")?);
        ControlPoint::new(px, f[2]).map_err(|e| e.to_string())
    }

    fn to_fields(&self) -> Vec<f64> {
        vec![self.pixel.u as f64, self.pixel.v as f64, self.depth]
    }
}

impl CsvRecord for BoardCorrespondence {
    const COLUMNS: &'static [&'static str] = &["X", "Y", "Z", "u", "v"];

    fn from_fields(f: &[f64]) -> Result<Self, String> {
        Ok(Self {
            world: Point3::new(f[0], f[1], f[2]),
            pixel: Pixel::new(f[3], f[4]),
        })
    }

    fn to_fields(&self) -> Vec<f64> {
        vec![self.world.x, self.world.y, self.world.z, self.pixel.u, self.pixel.v]
    }
}

impl CsvRecord for GroundCorrespondence {
    const COLUMNS: &'static [&'static str] = &["u", "v", "X_m", "Y_m"];

    fn from_fields(f: &[f64]) -> Result<Self, String> {
        Ok(Self {
            pixel: Pixel::new(f[0], f[1]),
            ground: [f[2], f[3]],
        })
    }

    fn to_fields(&self) -> Vec<f64> {
        vec![self.pixel.u, self.pixel.v, self.ground[0], self.ground[1]]
    }
}

fn field_str(rec: &ByteRecord, i: usize) -> &str {
    std::str::from_utf8(&rec[i]).unwrap_or("\u{fffd}")
}

fn is_header<T: CsvRecord>(rec: &ByteRecord) -> bool {
    rec.len() == T::COLUMNS.len()
        && rec
            .iter()
            .zip(T::COLUMNS)
            .all(|(f, c)| std::str::from_utf8(f).is_ok_and(|f| f.eq_ignore_ascii_case(c)))
}

pub fn decode_csv<T: CsvRecord>(bytes: &[u8]) -> Result<Vec<T>, FormatError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(Trim::All)
        .from_reader(bytes);
    let ncols = T::COLUMNS.len();
    let mut out = Vec::new();
    let mut first = true;
    let mut rec = ByteRecord::new();
    let mut fields = Vec::with_capacity(ncols);
    loop {
        let more = reader.read_byte_record(&mut rec).map_err(|e| FormatError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if std::mem::take(&mut first) && is_header::<T>(&rec) {
            continue;
        }
        if rec.len() != ncols {
            return Err(FormatError::SchemaMismatch {
                line,
                expected: ncols,
                got: rec.len(),
            });
        }
        fields.clear();
        for i in 0..ncols {
            let s = field_str(&rec, i);
            let x: f64 = s.parse().map_err(|_| FormatError::Parse {
                line,
                message: format!("column {}: cannot parse {s:?} as a number", T::COLUMNS[i]),
            })?;
            if !x.is_finite() {
                return Err(FormatError::Parse {
                    line,
                    message: format!("column {}: non-finite value", T::COLUMNS[i]),
                });
            }
            fields.push(x);
        }
        out.push(T::from_fields(&fields).map_err(|message| FormatError::Parse { line, message })?);
    }
    Ok(out)
}

/// Header row followed by one line per record, LF terminated.
pub fn encode_csv<T: CsvRecord>(rows: &[T]) -> String {
    let mut s = T::COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.to_fields().iter().map(|x| format!("{x}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
