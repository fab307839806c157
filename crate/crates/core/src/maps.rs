//! Dense per-pixel rasters: relative inverse depth, metric depth and
//! instance labels. All rasters are row-major, top row first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pixel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("raster of {width}x{height} needs {expected} values, got {got}")]
    SizeMismatch {
        width: u32,
        height: u32,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at ({u}, {v})")]
    NonFinite { u: u32, v: u32 },
    #[error("dimensions {a:?} and {b:?} disagree")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
}

/// Integer pixel position on a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPixel {
    pub u: u32,
    pub v: u32,
}

impl GridPixel {
    pub const fn new(u: u32, v: u32) -> Self {
        Self { u, v }
    }

    pub fn to_pixel(self) -> Pixel {
        Pixel::new(self.u as f64, self.v as f64)
    }
}

fn check_len(width: u32, height: u32, got: usize) -> Result<(), MapError> {
    let expected = width as usize * height as usize;
    if expected != got {
        return Err(MapError::SizeMismatch {
            width,
            height,
            expected,
            got,
        });
    }
    Ok(())
}

/// Relative inverse depth as produced by a monocular network.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseDepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl InverseDepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self, MapError> {
        check_len(width, height, values.len())?;
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(MapError::NonFinite {
                u: (i % width as usize) as u32,
                v: (i / width as usize) as u32,
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: GridPixel) -> f64 {
        self.values[p.v as usize * self.width as usize + p.u as usize]
    }
}

/// Metric depth in meters; non-positive entries mean "no valid depth".
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

/// Depths measured against a reference sensor share the metric layout.
pub type ReferenceDepthMap = MetricDepthMap;

impl MetricDepthMap {
    /// Stored value of an invalid pixel (also its on-disk encoding).
    pub const INVALID: f64 = 0.0;

    /// Builds a map; any value that is not a finite positive number becomes
    /// [`Self::INVALID`].
    pub fn new(width: u32, height: u32, mut values: Vec<f64>) -> Result<Self, MapError> {
        check_len(width, height, values.len())?;
        for v in &mut values {
            if !(v.is_finite() && *v > 0.0) {
                *v = Self::INVALID;
            }
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Raw values, with invalid pixels stored as [`Self::INVALID`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn depth(&self, p: GridPixel) -> Option<f64> {
        let d = self.values[p.v as usize * self.width as usize + p.u as usize];
        (d > 0.0).then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|d| **d > 0.0).count()
    }
}

/// Per-pixel instance labels: 0 is background, `k >= 1` is person `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    width: u32,
    height: u32,
    labels: Vec<u32>,
}

impl InstanceMask {
    pub fn new(width: u32, height: u32, labels: Vec<u32>) -> Result<Self, MapError> {
        check_len(width, height, labels.len())?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, p: GridPixel) -> u32 {
        self.labels[p.v as usize * self.width as usize + p.u as usize]
    }

    /// Label at signed coordinates, `None` outside the raster.
    pub fn label_at(&self, u: i64, v: i64) -> Option<u32> {
        if u < 0 || v < 0 || u >= self.width as i64 || v >= self.height as i64 {
            return None;
        }
        Some(self.label(GridPixel::new(u as u32, v as u32)))
    }

    pub fn set(&mut self, p: GridPixel, label: u32) {
        let w = self.width as usize;
        self.labels[p.v as usize * w + p.u as usize] = label;
    }

    /// Pixel sets of every instance, in row-major order, keyed by id.
    pub fn instances(&self) -> BTreeMap<u32, Vec<GridPixel>> {
        let mut out: BTreeMap<u32, Vec<GridPixel>> = BTreeMap::new();
        let w = self.width as usize;
        for (i, &l) in self.labels.iter().enumerate() {
            if l != 0 {
                out.entry(l)
                    .or_default()
                    .push(GridPixel::new((i % w) as u32, (i / w) as u32));
            }
        }
        out
    }

    /// Pixels of a single instance, in row-major order.
    pub fn instance_pixels(&self, id: u32) -> Vec<GridPixel> {
        let w = self.width as usize;
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == id)
            .map(|(i, _)| GridPixel::new((i % w) as u32, (i / w) as u32))
            .collect()
    }
}

pub(crate) fn same_dims(a: (u32, u32), b: (u32, u32)) -> Result<(), MapError> {
    if a != b {
        return Err(MapError::DimensionMismatch { a, b });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_map_normalizes_invalid_values() {
        let m = MetricDepthMap::new(2, 2, vec![1.0, -2.0, f64::NAN, 0.0]).unwrap();
        assert_eq!(m.depth(GridPixel::new(0, 0)), Some(1.0));
        assert_eq!(m.depth(GridPixel::new(1, 0)), None);
        assert_eq!(m.values(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.valid_count(), 1);
    }

    #[test]
    fn inverse_map_rejects_non_finite() {
        assert_eq!(
            InverseDepthMap::new(2, 1, vec![0.0, f64::INFINITY]),
            Err(MapError::NonFinite { u: 1, v: 0 })
        );
        assert!(InverseDepthMap::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn instances_are_grouped_by_label() {
        let m = InstanceMask::new(3, 2, vec![0, 1, 1, 2, 0, 1]).unwrap();
        let inst = m.instances();
        assert_eq!(inst.len(), 2);
        assert_eq!(
            inst[&1],
            vec![GridPixel::new(1, 0), GridPixel::new(2, 0), GridPixel::new(2, 1)]
        );
        assert_eq!(m.instance_pixels(2), vec![GridPixel::new(0, 1)]);
        assert_eq!(m.label_at(-1, 0), None);
        assert_eq!(m.label_at(2, 1), Some(1));
    }
}
