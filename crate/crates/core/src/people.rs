//! Person instances: occlusion filtering of control points, mask centroids
//! and 3D localization.

use thiserror::Error;

use crate::calibration::ControlPoint;
use crate::geometry::{back_project, round_half_down, CameraIntrinsics, Pixel, Point3};
use crate::maps::{GridPixel, InstanceMask, MetricDepthMap};

/// Instances smaller than this are treated as segmentation noise.
pub const DEFAULT_MIN_PIXELS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeopleError {
    #[error("instance {0} has no pixels")]
    EmptyInstance(u32),
    #[error("instance {0} has no pixel with valid depth")]
    NoValidDepth(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonMeasurement {
    pub instance_id: u32,
    pub centroid: GridPixel,
    /// Fixed-camera frame, meters.
    pub position: Point3,
}

/// Drops control points that fall on any person pixel.
pub fn filter_occluded_control_points(points: &[ControlPoint], mask: &InstanceMask) -> Vec<ControlPoint> {
    points
        .iter()
        .filter(|cp| mask.label(cp.pixel) == 0)
        .copied()
        .collect()
}

/// Centroid pixel of instance `id`.
///
/// The mean pixel of the instance is rounded to the nearest integer, halves
/// going down. If that pixel is not part of the instance, or has no valid
/// depth, the instance pixel with valid depth nearest to the (unrounded)
/// mean is used instead, breaking ties by smallest `v` then smallest `u`.
pub fn compute_centroid(
    mask: &InstanceMask,
    id: u32,
    depth: &MetricDepthMap,
) -> Result<GridPixel, PeopleError> {
    centroid_of_pixels(mask, id, &mask.instance_pixels(id), depth)
}

/// Same as [`compute_centroid`] with the instance pixels already gathered.
pub fn centroid_of_pixels(
    mask: &InstanceMask,
    id: u32,
    pixels: &[GridPixel],
    depth: &MetricDepthMap,
) -> Result<GridPixel, PeopleError> {
    if pixels.is_empty() {
        return Err(PeopleError::EmptyInstance(id));
    }
    let n = pixels.len() as f64;
    // sums of integer coordinates are exact in f64 for any realistic image
    let (su, sv) = pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.u as f64, b + p.v as f64));
    let mean = Pixel::new(su / n, sv / n);
    let (ru, rv) = (round_half_down(mean.u), round_half_down(mean.v));
    if mask.label_at(ru, rv) == Some(id) {
        let c = GridPixel::new(ru as u32, rv as u32);
        if depth.depth(c).is_some() {
            return Ok(c);
        }
    }
    pixels
        .iter()
        .filter(|p| depth.depth(**p).is_some())
        .map(|p| {
            let du = p.u as f64 - mean.u;
            let dv = p.v as f64 - mean.v;
            (du * du + dv * dv, *p)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.v.cmp(&b.1.v)).then(a.1.u.cmp(&b.1.u)))
        .map(|(_, p)| p)
        .ok_or(PeopleError::NoValidDepth(id))
}

/// Back-projects the centroid of instance `id` using the depth under it.
pub fn localize_person(
    mask: &InstanceMask,
    id: u32,
    depth: &MetricDepthMap,
    k: &CameraIntrinsics,
) -> Result<PersonMeasurement, PeopleError> {
    localize_pixels(mask, id, &mask.instance_pixels(id), depth, k)
}

pub(crate) fn localize_pixels(
    mask: &InstanceMask,
    id: u32,
    pixels: &[GridPixel],
    depth: &MetricDepthMap,
    k: &CameraIntrinsics,
) -> Result<PersonMeasurement, PeopleError> {
    let centroid = centroid_of_pixels(mask, id, pixels, depth)?;
    let d = depth.depth(centroid).ok_or(PeopleError::NoValidDepth(id))?;
    let position = back_project(k, centroid.to_pixel(), d).expect("valid depths are positive");
    Ok(PersonMeasurement {
        instance_id: id,
        centroid,
        position,
    })
}

/// Localizes every instance with at least `min_pixels` pixels, in id order.
/// Instances that cannot be localized are returned separately.
pub fn localize_all(
    mask: &InstanceMask,
    depth: &MetricDepthMap,
    k: &CameraIntrinsics,
    min_pixels: usize,
) -> (Vec<PersonMeasurement>, Vec<PeopleError>) {
    let mut found = Vec::new();
    let mut failed = Vec::new();
    for (id, pixels) in mask.instances() {
        if pixels.len() < min_pixels {
            continue;
        }
        match localize_pixels(mask, id, &pixels, depth, k) {
            Ok(m) => found.push(m),
            Err(e) => failed.push(e),
        }
    }
    (found, failed)
}
