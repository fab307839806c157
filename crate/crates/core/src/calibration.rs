//! Offline initialization: moves confident SLAM depth samples from the
//! mobile device into the fixed camera image, where they become the control
//! points used to scale every frame.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{back_project, project_point, transform_point, CameraIntrinsics, Pixel, Pose};
use crate::maps::GridPixel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("no control point survived the remapping; redo the calibration")]
    EmptyResult,
    #[error("invalid SLAM point: {0}")]
    InvalidPoint(String),
    #[error("confidence threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

/// A depth sample from the mobile device's SLAM, in mobile image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSlamPoint {
    pub pixel: Pixel,
    pub depth: f64,
    pub confidence: f64,
}

impl RawSlamPoint {
    pub fn new(pixel: Pixel, depth: f64, confidence: f64) -> Result<Self, CalibrationError> {
        if !(pixel.u.is_finite() && pixel.v.is_finite()) {
            return Err(CalibrationError::InvalidPoint("non-finite pixel".into()));
        }
        if !(depth.is_finite() && depth > 0.0) {
            return Err(CalibrationError::InvalidPoint(format!(
                "depth must be positive, got {depth}"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(CalibrationError::InvalidPoint(format!(
                "confidence must be in [0, 1], got {confidence}"
            )));
        }
        Ok(Self {
            pixel,
            depth,
            confidence,
        })
    }
}

/// A fixed-camera background pixel with known metric depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub pixel: GridPixel,
    pub depth: f64,
}

impl ControlPoint {
    pub fn new(pixel: GridPixel, depth: f64) -> Result<Self, CalibrationError> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(CalibrationError::InvalidPoint(format!(
                "control point depth must be positive, got {depth}"
            )));
        }
        Ok(Self { pixel, depth })
    }
}

/// Keeps the points whose confidence reaches `threshold`, in input order.
pub fn filter_by_confidence(
    points: &[RawSlamPoint],
    threshold: f64,
) -> Result<Vec<RawSlamPoint>, CalibrationError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CalibrationError::InvalidThreshold(threshold));
    }
    Ok(points
        .iter()
        .filter(|p| p.confidence >= threshold)
        .copied()
        .collect())
}

/// Transfers a mobile-frame sample to the fixed camera without rounding.
/// Returns the continuous fixed-camera pixel and the fixed-frame depth, or
/// `None` when the point ends up on or behind the fixed camera plane.
pub fn remap_point(
    p: &RawSlamPoint,
    k_mobile: &CameraIntrinsics,
    k_fixed: &CameraIntrinsics,
    mobile_to_fixed: &Pose,
) -> Option<(Pixel, f64)> {
    let in_mobile = back_project(k_mobile, p.pixel, p.depth).ok()?;
    let in_fixed = transform_point(mobile_to_fixed, &in_mobile);
    let px = project_point(k_fixed, &in_fixed).ok()?;
    Some((px, in_fixed.z))
}

/// Remaps confidence-filtered SLAM samples to integer control points in the
/// fixed image.
///
/// Pixels are rounded to the nearest integer (ties toward negative infinity).
/// Points outside the fixed image or behind the camera are dropped. When
/// several points share a pixel the nearest one wins. Output follows the
/// order in which pixels were first hit.
pub fn remap_control_points(
    points: &[RawSlamPoint],
    k_mobile: &CameraIntrinsics,
    k_fixed: &CameraIntrinsics,
    mobile_to_fixed: &Pose,
) -> Result<Vec<ControlPoint>, CalibrationError> {
    let mut out: Vec<ControlPoint> = Vec::new();
    let mut slot: HashMap<GridPixel, usize> = HashMap::new();
    for p in points {
        let Some((px, depth)) = remap_point(p, k_mobile, k_fixed, mobile_to_fixed) else {
            continue;
        };
        let (u, v) = px.round_half_down();
        if !k_fixed.contains(u, v) {
            continue;
        }
        let pixel = GridPixel::new(u as u32, v as u32);
        match slot.get(&pixel) {
            Some(&i) => {
                if depth < out[i].depth {
                    out[i].depth = depth;
                }
            }
            None => {
                slot.insert(pixel, out.len());
                out.push(ControlPoint { pixel, depth });
            }
        }
    }
    if out.is_empty() {
        return Err(CalibrationError::EmptyResult);
    }
    Ok(out)
}
