//! Ground-plane homography baseline: each person is placed at the midpoint
//! of the bottom edge of its bounding box, mapped onto the floor.

use nalgebra::{Matrix3, Point2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distancing::{PairDistance, RiskThresholds};
use crate::geometry::{apply_homography, dlt_homography, GeometryError, Pixel};
use crate::maps::{GridPixel, InstanceMask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("ground plane not visible: {0} ground correspondences, need at least 4")]
    GroundNotVisible(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("homogeneous coordinate vanishes for the foot of instance {0}")]
    HomogeneousDivideByZero(u32),
    #[error("instance {0} touches the bottom image border; its feet are not visible")]
    FootNotVisible(u32),
    #[error("instance {0} has no pixels")]
    EmptyInstance(u32),
}

/// Projective map from image pixels to metric floor coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundHomography(Matrix3<f64>);

impl GroundHomography {
    pub fn new(h: Matrix3<f64>) -> Result<Self, GeometryError> {
        let norm = h.norm();
        if !(norm.is_finite() && norm > 0.0) || !((h / norm).determinant().abs() > 1e-12) {
            return Err(GeometryError::DegenerateConfiguration(
                "homography is not invertible".into(),
            ));
        }
        Ok(Self(h))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn map(&self, px: Pixel) -> Option<Point2<f64>> {
        apply_homography(&self.0, Point2::new(px.u, px.v))
    }
}

/// A pixel observed on the floor with its metric floor coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundCorrespondence {
    pub pixel: Pixel,
    pub ground: [f64; 2],
}

pub fn fit_ground_homography(
    image_points: &[Pixel],
    ground_points: &[Point2<f64>],
) -> Result<GroundHomography, BaselineError> {
    let src: Vec<Point2<f64>> = image_points.iter().map(|p| Point2::new(p.u, p.v)).collect();
    let h = dlt_homography(&src, ground_points)?;
    Ok(GroundHomography::new(h)?)
}

/// Fits from correspondence records, reporting an invisible ground plane
/// when fewer than four are available.
pub fn fit_from_correspondences(
    corr: &[GroundCorrespondence],
) -> Result<GroundHomography, BaselineError> {
    if corr.len() < 4 {
        return Err(BaselineError::GroundNotVisible(corr.len()));
    }
    let img: Vec<Pixel> = corr.iter().map(|c| c.pixel).collect();
    let gnd: Vec<Point2<f64>> = corr.iter().map(|c| Point2::new(c.ground[0], c.ground[1])).collect();
    fit_ground_homography(&img, &gnd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl BoundingBox {
    pub fn of(pixels: &[GridPixel]) -> Option<Self> {
        let first = pixels.first()?;
        let mut b = BoundingBox {
            u_min: first.u,
            v_min: first.v,
            u_max: first.u,
            v_max: first.v,
        };
        for p in pixels {
            b.u_min = b.u_min.min(p.u);
            b.u_max = b.u_max.max(p.u);
            b.v_min = b.v_min.min(p.v);
            b.v_max = b.v_max.max(p.v);
        }
        Some(b)
    }

    /// Midpoint of the bottom edge.
    pub fn foot(&self) -> Pixel {
        Pixel::new((self.u_min as f64 + self.u_max as f64) * 0.5, self.v_max as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPosition {
    pub instance_id: u32,
    pub bbox: BoundingBox,
    pub foot: Pixel,
    /// Floor coordinates, meters.
    pub ground: Point2<f64>,
}

/// Floor position of every instance with at least `min_pixels` pixels.
pub fn baseline_positions(
    mask: &InstanceMask,
    h: &GroundHomography,
    min_pixels: usize,
) -> Result<Vec<GroundPosition>, BaselineError> {
    let mut out = Vec::new();
    for (id, pixels) in mask.instances() {
        if pixels.len() < min_pixels {
            continue;
        }
        let bbox = BoundingBox::of(&pixels).ok_or(BaselineError::EmptyInstance(id))?;
        if bbox.v_max + 1 >= mask.height() {
            return Err(BaselineError::FootNotVisible(id));
        }
        let foot = bbox.foot();
        let ground = h.map(foot).ok_or(BaselineError::HomogeneousDivideByZero(id))?;
        out.push(GroundPosition {
            instance_id: id,
            bbox,
            foot,
            ground,
        });
    }
    Ok(out)
}

/// Pairwise floor-plane distances, sorted by ids.
pub fn baseline_pairs(positions: &[GroundPosition], t: &RiskThresholds) -> Vec<PairDistance> {
    let mut out = Vec::new();
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            out.push(PairDistance::new(
                a.instance_id,
                b.instance_id,
                (a.ground - b.ground).norm(),
                t,
            ));
        }
    }
    out.sort_by_key(|p| (p.id_a, p.id_b));
    out
}
