//! Planar Perspective-n-Point: homography initialization followed by
//! Gauss-Newton refinement of the reprojection error.

use nalgebra::{DMatrix, DVector, Matrix3, Point2, SymmetricEigen, Vector3};

use super::{
    dlt_homography, exp_so3, orthonormalize, skew, CameraIntrinsics, GeometryError, Pixel, Point3,
    Pose,
};

#[derive(Debug, Clone, Copy)]
pub struct PnpOptions {
    pub max_iterations: usize,
    /// Stop when the relative decrease of the squared residual falls below this.
    pub relative_tolerance: f64,
    /// Out-of-plane spread (relative to the in-plane extent) tolerated before
    /// the input is rejected as non-planar.
    pub planarity_tolerance: f64,
}

impl Default for PnpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            relative_tolerance: 1e-12,
            planarity_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PnpSolution {
    /// World-to-camera pose after refinement.
    pub pose: Pose,
    /// Pose obtained from the homography decomposition alone.
    pub initial_pose: Pose,
    /// RMS reprojection error (pixels) of `initial_pose`.
    pub initial_rms: f64,
    /// RMS reprojection error (pixels) of `pose`.
    pub final_rms: f64,
    pub iterations: usize,
}

/// Estimates the world-to-camera pose from coplanar world points and their
/// pixel observations.
pub fn estimate_pose_pnp(
    world: &[Point3],
    observed: &[Pixel],
    k: &CameraIntrinsics,
) -> Result<Pose, GeometryError> {
    estimate_pose_pnp_detailed(world, observed, k, &PnpOptions::default()).map(|s| s.pose)
}

pub fn estimate_pose_pnp_detailed(
    world: &[Point3],
    observed: &[Pixel],
    k: &CameraIntrinsics,
    opts: &PnpOptions,
) -> Result<PnpSolution, GeometryError> {
    if world.len() != observed.len() {
        return Err(GeometryError::LengthMismatch {
            world: world.len(),
            observed: observed.len(),
        });
    }
    if world.len() < 4 {
        return Err(GeometryError::DegenerateConfiguration(format!(
            "need at least 4 correspondences, got {}",
            world.len()
        )));
    }
    if world
        .iter()
        .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        || observed.iter().any(|p| !(p.u.is_finite() && p.v.is_finite()))
    {
        return Err(GeometryError::DegenerateConfiguration(
            "non-finite input".into(),
        ));
    }

    let frame = PlaneFrame::fit(world, opts.planarity_tolerance)?;
    let plane_pts: Vec<Point2<f64>> = world.iter().map(|p| frame.to_plane(p)).collect();
    let image_pts: Vec<Point2<f64>> = observed
        .iter()
        .map(|px| {
            let (x, y) = k.normalize(*px);
            Point2::new(x, y)
        })
        .collect();
    let h = dlt_homography(&plane_pts, &image_pts)?;

    let (r_plane, t) = decompose_plane_homography(&h);
    // world -> plane -> camera
    let rotation = orthonormalize(&(r_plane * frame.basis.transpose()));
    let translation = t - rotation * frame.origin.coords;
    let initial_pose = Pose {
        rotation,
        translation,
    };

    let initial_cost = reprojection_cost(&initial_pose, world, observed, k);
    if !initial_cost.is_finite() {
        return Err(GeometryError::DegenerateConfiguration(
            "initial pose places points behind the camera".into(),
        ));
    }
    let mut best: Option<(Pose, f64, usize)> = None;
    let mut failure = None;
    let twin = mirrored_tilt(&initial_pose, &frame);
    for start in [Some(initial_pose), twin].into_iter().flatten() {
        let cost = reprojection_cost(&start, world, observed, k);
        if !cost.is_finite() {
            continue;
        }
        match refine(start, cost, world, observed, k, opts) {
            Ok(r) if best.as_ref().is_none_or(|b| r.1 < b.1) => best = Some(r),
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    }
    let Some((pose, final_cost, iterations)) = best else {
        return Err(failure.expect("the homography pose was refined"));
    };
    let n = world.len() as f64;
    Ok(PnpSolution {
        pose,
        initial_pose,
        initial_rms: (initial_cost / n).sqrt(),
        final_rms: (final_cost / n).sqrt(),
        iterations,
    })
}

/// Sum of squared pixel residuals; infinite if any point is not in front of
/// the camera.
pub(crate) fn reprojection_cost(
    pose: &Pose,
    world: &[Point3],
    observed: &[Pixel],
    k: &CameraIntrinsics,
) -> f64 {
    let mut cost = 0.0;
    for (x, obs) in world.iter().zip(observed) {
        let pc = pose.rotation * x.coords + pose.translation;
        if !(pc.z > 0.0) {
            return f64::INFINITY;
        }
        let du = k.fx() * pc.x / pc.z + k.cx() - obs.u;
        let dv = k.fy() * pc.y / pc.z + k.cy() - obs.v;
        cost += du * du + dv * dv;
    }
    cost
}

/// Residuals and their Jacobian with respect to a left rotation increment
/// and a translation increment.
fn linearize(pose: &Pose, world: &[Point3], observed: &[Pixel], k: &CameraIntrinsics) -> (DMatrix<f64>, DVector<f64>) {
    let n = world.len();
    let mut jac = DMatrix::<f64>::zeros(2 * n, 6);
    let mut res = DVector::<f64>::zeros(2 * n);
    for (i, (x, obs)) in world.iter().zip(observed).enumerate() {
        let rx = pose.rotation * x.coords;
        let pc = rx + pose.translation;
        let iz = 1.0 / pc.z;
        res[2 * i] = k.fx() * pc.x * iz + k.cx() - obs.u;
        res[2 * i + 1] = k.fy() * pc.y * iz + k.cy() - obs.v;
        let dproj = nalgebra::Matrix2x3::new(
            k.fx() * iz,
            0.0,
            -k.fx() * pc.x * iz * iz,
            0.0,
            k.fy() * iz,
            -k.fy() * pc.y * iz * iz,
        );
        let d_rot = dproj * (-skew(&rx));
        for c in 0..3 {
            jac[(2 * i, c)] = d_rot[(0, c)];
            jac[(2 * i + 1, c)] = d_rot[(1, c)];
            jac[(2 * i, c + 3)] = dproj[(0, c)];
            jac[(2 * i + 1, c + 3)] = dproj[(1, c)];
        }
    }
    (jac, res)
}

fn perturb(pose: &Pose, delta: &DVector<f64>) -> Pose {
    let w = Vector3::new(delta[0], delta[1], delta[2]);
    let dt = Vector3::new(delta[3], delta[4], delta[5]);
    Pose {
        rotation: orthonormalize(&(exp_so3(&w) * pose.rotation)),
        translation: pose.translation + dt,
    }
}

/// Hessian of half the squared residual norm: central differences of the
/// analytic gradient `J^T r`, symmetrized.
fn hessian(pose: &Pose, world: &[Point3], observed: &[Pixel], k: &CameraIntrinsics) -> DMatrix<f64> {
    const STEP: f64 = 1e-6;
    let mut h = DMatrix::<f64>::zeros(6, 6);
    for j in 0..6 {
        let mut e = DVector::<f64>::zeros(6);
        e[j] = STEP;
        let (jp, rp) = linearize(&perturb(pose, &e), world, observed, k);
        let (jm, rm) = linearize(&perturb(pose, &-e), world, observed, k);
        let col = (jp.transpose() * rp - jm.transpose() * rm) / (2.0 * STEP);
        h.set_column(j, &col);
    }
    (&h + h.transpose()) * 0.5
}

/// Damped Newton iterations on the reprojection cost. The damping is
/// scaled by the Gauss-Newton diagonal, so large damping falls back to
/// scaled gradient descent.
fn refine(
    mut pose: Pose,
    mut cost: f64,
    world: &[Point3],
    observed: &[Pixel],
    k: &CameraIntrinsics,
    opts: &PnpOptions,
) -> Result<(Pose, f64, usize), GeometryError> {
    let mut mu = 0.0;
    for iter in 0..opts.max_iterations {
        if cost == 0.0 {
            return Ok((pose, cost, iter));
        }
        let (jac, res) = linearize(&pose, world, observed, k);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &res;
        let hess = hessian(&pose, world, observed, k);
        if mu == 0.0 {
            mu = 1e-3 * jtj.diagonal().max();
        }
        let scale: Vec<f64> = (0..6).map(|d| jtj[(d, d)].max(1e-12)).collect();

        let mut accepted = None;
        while mu.is_finite() && mu < 1e32 {
            let mut damped = hess.clone();
            for (d, s) in scale.iter().enumerate() {
                damped[(d, d)] += mu * s;
            }
            let Some(ch) = damped.cholesky() else {
                mu *= 4.0;
                continue;
            };
            let candidate = perturb(&pose, &-ch.solve(&grad));
            let c = reprojection_cost(&candidate, world, observed, k);
            if c < cost {
                mu = (mu / 3.0).max(1e-300);
                accepted = Some((candidate, c));
                break;
            }
            mu *= 4.0;
        }
        let Some((next, next_cost)) = accepted else {
            // no descent direction left at working precision
            return Ok((pose, cost, iter));
        };
        let rel = (cost - next_cost) / cost;
        pose = next;
        cost = next_cost;
        if rel < opts.relative_tolerance {
            return Ok((pose, cost, iter + 1));
        }
    }
    Err(GeometryError::NoConvergence {
        iterations: opts.max_iterations,
    })
}

/// The second planar solution: board axes reflected through the plane
/// orthogonal to the viewing direction of the board center.
fn mirrored_tilt(pose: &Pose, frame: &PlaneFrame) -> Option<Pose> {
    let center = pose.rotation * frame.origin.coords + pose.translation;
    let v = center.try_normalize(1e-12)?;
    let flip = Matrix3::identity() - 2.0 * v * v.transpose();
    // rotation from the plane frame to the camera
    let r_plane = pose.rotation * frame.basis;
    let a = flip * r_plane.column(0);
    let b = flip * r_plane.column(1);
    let r_plane = orthonormalize(&Matrix3::from_columns(&[a, b, a.cross(&b)]));
    let rotation = orthonormalize(&(r_plane * frame.basis.transpose()));
    Some(Pose {
        rotation,
        translation: center - rotation * frame.origin.coords,
    })
}

/// `H ~ [r1 r2 t]` for a plane at `z = 0` observed in normalized coordinates.
fn decompose_plane_homography(h: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let h1 = h.column(0).into_owned();
    let h2 = h.column(1).into_owned();
    let h3 = h.column(2).into_owned();
    let mut lambda = 2.0 / (h1.norm() + h2.norm());
    // the plane origin (centroid of the points) is in front of the camera
    if h3.z * lambda < 0.0 {
        lambda = -lambda;
    }
    let r1 = h1 * lambda;
    let r2 = h2 * lambda;
    let r3 = r1.cross(&r2);
    let r = orthonormalize(&Matrix3::from_columns(&[r1, r2, r3]));
    (r, h3 * lambda)
}

/// Orthonormal frame spanning the plane of the world points.
struct PlaneFrame {
    origin: Point3,
    /// Columns: two in-plane axes and the normal.
    basis: Matrix3<f64>,
}

impl PlaneFrame {
    fn fit(points: &[Point3], planarity_tolerance: f64) -> Result<Self, GeometryError> {
        let n = points.len() as f64;
        let origin = Point3::from(points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n);
        let mut scatter = Matrix3::zeros();
        for p in points {
            let d = p - origin;
            scatter += d * d.transpose();
        }
        let eig = SymmetricEigen::new(scatter);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let spread: Vec<f64> = order
            .iter()
            .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
            .collect();
        if !(spread[0] > 0.0) {
            return Err(GeometryError::DegenerateConfiguration(
                "all world points coincide".into(),
            ));
        }
        if spread[1] < 1e-9 * spread[0] {
            return Err(GeometryError::DegenerateConfiguration(
                "world points are collinear".into(),
            ));
        }
        let flatness = spread[2] / spread[0];
        if flatness > planarity_tolerance {
            return Err(GeometryError::NonPlanar(flatness));
        }
        let e1 = eig.eigenvectors.column(order[0]).into_owned().normalize();
        let e2 = eig.eigenvectors.column(order[1]).into_owned().normalize();
        let normal = e1.cross(&e2).normalize();
        let e2 = normal.cross(&e1);
        Ok(Self {
            origin,
            basis: Matrix3::from_columns(&[e1, e2, normal]),
        })
    }

    fn to_plane(&self, p: &Point3) -> Point2<f64> {
        let q = self.basis.transpose() * (p - self.origin);
        Point2::new(q.x, q.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project_point, transform_point};

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(800.0, 820.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn observe(pose: &Pose, world: &[Point3], k: &CameraIntrinsics) -> Vec<Pixel> {
        world
            .iter()
            .map(|p| project_point(k, &transform_point(pose, p)).unwrap())
            .collect()
    }

    #[test]
    fn identity_pose_from_unit_square() {
        let k = k();
        let world = [
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
        ];
        let obs = observe(&Pose::identity(), &world, &k);
        let pose = estimate_pose_pnp(&world, &obs, &k).unwrap();
        assert!((pose.rotation() - Matrix3::identity()).amax() < 1e-6);
        assert!(pose.translation().norm() < 1e-6);
    }

    #[test]
    fn recovers_tilted_board() {
        let k = k();
        let truth = Pose::from_axis_angle(Vector3::new(0.3, -0.2, 0.1), Vector3::new(0.1, -0.2, 3.0));
        let world: Vec<Point3> = [(0.0, 0.0), (0.4, 0.0), (0.4, 0.3), (0.0, 0.3), (0.2, 0.1), (0.1, 0.25)]
            .iter()
            .map(|&(x, y)| Point3::new(x, y, 0.0))
            .collect();
        let obs = observe(&truth, &world, &k);
        let sol = estimate_pose_pnp_detailed(&world, &obs, &k, &PnpOptions::default()).unwrap();
        assert!((sol.pose.translation() - truth.translation()).norm() < 1e-6);
        assert!(sol.pose.rotation_angle_to(&truth) < 1e-6);
        assert!(sol.final_rms < 1e-6);
        assert!(sol.final_rms <= sol.initial_rms);
    }

    #[test]
    fn collinear_world_points_are_degenerate() {
        let k = k();
        let world: Vec<Point3> = (0..4).map(|i| Point3::new(0.1 * i as f64, 0.0, 2.0)).collect();
        let obs: Vec<Pixel> = (0..4).map(|i| Pixel::new(320.0 + 40.0 * i as f64, 240.0)).collect();
        assert!(matches!(
            estimate_pose_pnp(&world, &obs, &k),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn too_few_and_mismatched_inputs() {
        let k = k();
        let world = [Point3::new(0.0, 0.0, 1.0); 3];
        let obs = [Pixel::new(0.0, 0.0); 3];
        assert!(matches!(
            estimate_pose_pnp(&world, &obs, &k),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
        assert!(matches!(
            estimate_pose_pnp(&world, &obs[..2], &k),
            Err(GeometryError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn non_planar_points_are_rejected() {
        let k = k();
        let world = [
            Point3::new(0.0, 0.0, 2.0),
            Point3::new(1.0, 0.0, 2.0),
            Point3::new(1.0, 1.0, 2.5),
            Point3::new(0.0, 1.0, 2.0),
        ];
        let obs = observe(&Pose::identity(), &world, &k);
        assert!(matches!(
            estimate_pose_pnp(&world, &obs, &k),
            Err(GeometryError::NonPlanar(_))
        ));
    }

    #[test]
    fn permutation_does_not_change_the_pose() {
        let k = k();
        let truth = Pose::from_axis_angle(Vector3::new(-0.2, 0.4, 0.05), Vector3::new(-0.3, 0.1, 4.0));
        let world: Vec<Point3> = [(0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5), (0.25, 0.1)]
            .iter()
            .map(|&(x, y)| Point3::new(x, y, 0.0))
            .collect();
        // perturb observations so the optimum is not trivially the truth
        let mut obs = observe(&truth, &world, &k);
        obs[0].u += 0.4;
        obs[3].v -= 0.3;
        let a = estimate_pose_pnp(&world, &obs, &k).unwrap();
        let perm = [3, 1, 4, 0, 2];
        let w2: Vec<_> = perm.iter().map(|&i| world[i]).collect();
        let o2: Vec<_> = perm.iter().map(|&i| obs[i]).collect();
        let b = estimate_pose_pnp(&w2, &o2, &k).unwrap();
        assert!((a.translation() - b.translation()).norm() < 1e-9);
        assert!(a.rotation_angle_to(&b) < 1e-9);
    }

    #[test]
    fn mirrored_tilt_is_a_proper_involution() {
        let world: Vec<Point3> = [(0.0, 0.0), (0.4, 0.0), (0.4, 0.3), (0.0, 0.3)]
            .iter()
            .map(|&(x, y)| Point3::new(x, y, 0.0))
            .collect();
        let frame = PlaneFrame::fit(&world, 1e-9).unwrap();
        let pose = Pose::from_axis_angle(Vector3::new(0.4, 0.1, -0.2), Vector3::new(0.2, -0.1, 2.5));
        let twin = mirrored_tilt(&pose, &frame).unwrap();
        let r = twin.rotation();
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!(twin.rotation_angle_to(&pose) > 1e-3);
        // the board centre stays on the same viewing ray
        let c0 = transform_point(&pose, &frame.origin);
        let c1 = transform_point(&twin, &frame.origin);
        assert!((c0 - c1).norm() < 1e-12);
        let back = mirrored_tilt(&twin, &frame).unwrap();
        assert!(back.rotation_angle_to(&pose) < 1e-9);
    }

    #[test]
    fn noisy_refinement_converges_and_lowers_the_error() {
        let k = k();
        let truth = Pose::from_axis_angle(Vector3::new(0.5, 0.2, 0.1), Vector3::new(0.1, 0.2, 3.5));
        let world: Vec<Point3> = (0..12)
            .map(|i| Point3::new(0.1 * (i % 4) as f64 - 0.15, 0.12 * (i / 4) as f64 - 0.12, 0.0))
            .collect();
        let mut obs = observe(&truth, &world, &k);
        for (i, o) in obs.iter_mut().enumerate() {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            o.u += 0.5 * s;
            o.v -= 0.3 * s * ((i % 3) as f64 - 1.0);
        }
        let sol = estimate_pose_pnp_detailed(&world, &obs, &k, &PnpOptions::default()).unwrap();
        assert!(sol.iterations < PnpOptions::default().max_iterations);
        assert!(sol.final_rms <= sol.initial_rms);
        assert!(sol.pose.rotation_angle_to(&truth) < 0.1);
    }
}
