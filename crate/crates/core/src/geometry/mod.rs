//! Pinhole camera model, rigid transforms and planar pose estimation.
//!
//! Camera frames follow the usual computer-vision convention: `x` to the
//! right, `y` down, `z` along the optical axis. Pixel coordinates are
//! continuous, with integer values at pixel centers.

mod homography;
mod pnp;

pub use homography::{apply_homography, dlt_homography};
pub use pnp::{estimate_pose_pnp, estimate_pose_pnp_detailed, PnpOptions, PnpSolution};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A 3D point in meters, expressed in some camera (or board) frame.
pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance used when validating that a matrix is a proper rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point depth {0} is not positive")]
    NonPositiveDepth(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("matrix is not a proper rotation: {0}")]
    InvalidRotation(String),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("world points are not coplanar (relative out-of-plane spread {0:.3e})")]
    NonPlanar(f64),
    #[error("{world} world points but {observed} observations")]
    LengthMismatch { world: usize, observed: usize },
    #[error("pose refinement did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Rounds both coordinates to the nearest integer, ties toward negative
    /// infinity (`2.5 -> 2`, `-0.5 -> -1`).
    pub fn round_half_down(self) -> (i64, i64) {
        (round_half_down(self.u), round_half_down(self.v))
    }

    pub fn distance(self, other: Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

pub(crate) fn round_half_down(x: f64) -> i64 {
    (x - 0.5).ceil() as i64
}

/// Pinhole intrinsics of a distortion-free camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(k: CameraIntrinsics) -> Self {
        RawIntrinsics {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidIntrinsics(msg));
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return bad(format!("focal lengths must be positive, got fx={fx} fy={fy}"));
        }
        if width == 0 || height == 0 {
            return bad(format!("image size must be at least 1x1, got {width}x{height}"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return bad(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// The 3x3 calibration matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Maps a pixel to normalized image coordinates (`K^-1 p`).
    pub fn normalize(&self, px: Pixel) -> (f64, f64) {
        ((px.u - self.cx) / self.fx, (px.v - self.cy) / self.fy)
    }

    /// Whether an integer pixel lies inside the image.
    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && u < self.width as i64 && v < self.height as i64
    }
}

/// Rigid transform `p' = R p + t` between two frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose", into = "RawPose")]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPose {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl TryFrom<RawPose> for Pose {
    type Error = GeometryError;

    fn try_from(r: RawPose) -> Result<Self, Self::Error> {
        Pose::new(
            Matrix3::from_row_slice(&r.rotation),
            Vector3::from_column_slice(&r.translation),
        )
    }
}

impl From<Pose> for RawPose {
    fn from(p: Pose) -> Self {
        let r = p.rotation;
        RawPose {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl Pose {
    /// Builds a pose, checking `R^T R = I` and `det R = 1` within
    /// [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(GeometryError::InvalidRotation(
                "translation has non-finite components".into(),
            ));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if !(ortho <= ROTATION_TOLERANCE) {
            return Err(GeometryError::InvalidRotation(format!(
                "max |R^T R - I| = {ortho:.3e}"
            )));
        }
        let det = rotation.determinant();
        if !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(GeometryError::InvalidRotation(format!("det R = {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Pose from an axis-angle vector (radians) and a translation.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: orthonormalize(&exp_so3(&axis_angle)),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: orthonormalize(&(self.rotation * other.rotation)),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Angle in radians of the relative rotation between two poses.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        rotation_angle(&(self.rotation * other.rotation.transpose()))
    }
}

/// Projects a camera-frame point to pixel coordinates.
pub fn project_point(k: &CameraIntrinsics, p: &Point3) -> Result<Pixel, GeometryError> {
    if !(p.z > 0.0) {
        return Err(GeometryError::NonPositiveDepth(p.z));
    }
    Ok(Pixel::new(
        k.fx * (p.x / p.z) + k.cx,
        k.fy * (p.y / p.z) + k.cy,
    ))
}

/// Lifts a pixel to the camera-frame point at the given z-depth.
pub fn back_project(k: &CameraIntrinsics, px: Pixel, depth: f64) -> Result<Point3, GeometryError> {
    if !(depth > 0.0) {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    Ok(Point3::new(
        depth * (px.u - k.cx) / k.fx,
        depth * (px.v - k.cy) / k.fy,
        depth,
    ))
}

pub fn transform_point(pose: &Pose, p: &Point3) -> Point3 {
    Point3::from(pose.rotation * p.coords + pose.translation)
}

pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Rodrigues' formula.
pub(crate) fn exp_so3(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    if theta < 1e-8 {
        // second-order series; exact to machine precision at this size
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * k * k
}

/// Nearest rotation matrix in the Frobenius sense.
pub(crate) fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * vt;
    }
    r
}

/// Rotation angle of `r`, accurate for both small and large angles.
pub(crate) fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    )
    .norm()
        * 0.5;
    let c = (r.trace() - 1.0) * 0.5;
    s.atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 500.0, 400.0, 1000, 800).unwrap()
    }

    #[test]
    fn projection_examples() {
        let k = k();
        assert_eq!(
            project_point(&k, &Point3::new(0.0, 0.0, 2.0)).unwrap(),
            Pixel::new(500.0, 400.0)
        );
        assert_eq!(
            project_point(&k, &Point3::new(0.5, 0.0, 2.0)).unwrap(),
            Pixel::new(750.0, 400.0)
        );
        assert!(matches!(
            project_point(&k, &Point3::new(0.0, 0.0, -1.0)),
            Err(GeometryError::NonPositiveDepth(_))
        ));
        assert!(matches!(
            project_point(&k, &Point3::new(1.0, 0.0, 0.0)),
            Err(GeometryError::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn back_projection_examples() {
        let k = k();
        assert_eq!(
            back_project(&k, Pixel::new(500.0, 400.0), 3.0).unwrap(),
            Point3::new(0.0, 0.0, 3.0)
        );
        assert_eq!(
            back_project(&k, Pixel::new(750.0, 400.0), 2.0).unwrap(),
            Point3::new(0.5, 0.0, 2.0)
        );
        assert!(back_project(&k, Pixel::new(1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn transform_examples() {
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(transform_point(&Pose::identity(), &p), p);
        let t = Pose::from_translation(Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(
            transform_point(&t, &Point3::new(0.0, 0.0, 2.0)),
            Point3::new(0.0, 0.0, 3.0)
        );
        let rz = Pose::new(
            Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
            Vector3::zeros(),
        )
        .unwrap();
        let q = transform_point(&rz, &Point3::new(1.0, 0.0, 0.0));
        assert!((q - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1).is_ok());
        let bad = r#"{"fx":-1,"fy":1,"cx":0,"cy":0,"width":4,"height":4}"#;
        assert!(serde_json::from_str::<CameraIntrinsics>(bad).is_err());
    }

    #[test]
    fn pose_rejects_non_rotations() {
        let scaled = Matrix3::identity() * 2.0;
        assert!(Pose::new(scaled, Vector3::zeros()).is_err());
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(reflect, Vector3::zeros()).is_err());
    }

    #[test]
    fn pose_json_layout_is_row_major() {
        let json = r#"{"rotation":[0,-1,0,1,0,0,0,0,1],"translation":[1,2,3]}"#;
        let p: Pose = serde_json::from_str(json).unwrap();
        assert_eq!(p.rotation()[(0, 1)], -1.0);
        assert_eq!(p.rotation()[(1, 0)], 1.0);
        let back = serde_json::to_string(&p).unwrap();
        let again: Pose = serde_json::from_str(&back).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn rounding_ties_go_down() {
        assert_eq!(round_half_down(2.5), 2);
        assert_eq!(round_half_down(2.5000001), 3);
        assert_eq!(round_half_down(2.4), 2);
        assert_eq!(round_half_down(-0.5), -1);
        assert_eq!(round_half_down(3.0), 3);
    }

    #[test]
    fn small_rotation_angle_is_accurate() {
        let r = exp_so3(&Vector3::new(3e-9, 0.0, 4e-9));
        assert!((rotation_angle(&r) - 5e-9).abs() < 1e-20);
        let r = exp_so3(&Vector3::new(0.0, 2.0, 0.0));
        assert!((rotation_angle(&r) - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn project_back_project_round_trip(
            x in -20.0f64..20.0, y in -20.0f64..20.0, z in 0.01f64..100.0
        ) {
            let k = k();
            let p = Point3::new(x, y, z);
            let px = project_point(&k, &p).unwrap();
            let q = back_project(&k, px, z).unwrap();
            prop_assert!((q - p).norm() <= 1e-9 * (1.0 + p.coords.norm()));
            let px2 = project_point(&k, &q).unwrap();
            prop_assert!(px.distance(px2) < 1e-9);
        }

        #[test]
        fn inverse_pose_round_trip(
            wx in -3.0f64..3.0, wy in -3.0f64..3.0, wz in -3.0f64..3.0,
            tx in -10.0f64..10.0, ty in -10.0f64..10.0, tz in -10.0f64..10.0,
            px in -10.0f64..10.0, py in -10.0f64..10.0, pz in -10.0f64..10.0,
        ) {
            let pose = Pose::from_axis_angle(Vector3::new(wx, wy, wz), Vector3::new(tx, ty, tz));
            let p = Point3::new(px, py, pz);
            let q = transform_point(&pose, &transform_point(&pose.inverse(), &p));
            prop_assert!((q - p).norm() < 1e-9);
            prop_assert!(Pose::new(*pose.rotation(), *pose.translation()).is_ok());
        }
    }
}
