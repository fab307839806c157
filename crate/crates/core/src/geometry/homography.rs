//! Normalized direct linear transform for plane-to-plane homographies.

use nalgebra::{DMatrix, Matrix3, Point2, Vector3};

use super::GeometryError;

/// Singular-value ratio below which the DLT null space is considered to
/// have dimension greater than one.
const RANK_TOLERANCE: f64 = 1e-8;

/// Fits `H` with `dst ~ H src` from at least four correspondences.
///
/// Both point sets are centered and scaled to an RMS distance of `sqrt(2)`
/// before the homogeneous system is solved by SVD. The result is scaled to
/// unit Frobenius norm with a non-negative bottom-right entry.
pub fn dlt_homography(
    src: &[Point2<f64>],
    dst: &[Point2<f64>],
) -> Result<Matrix3<f64>, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch {
            world: src.len(),
            observed: dst.len(),
        });
    }
    let n = src.len();
    if n < 4 {
        return Err(GeometryError::DegenerateConfiguration(format!(
            "need at least 4 correspondences, got {n}"
        )));
    }
    if src.iter().chain(dst).any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(GeometryError::DegenerateConfiguration(
            "non-finite coordinates".into(),
        ));
    }

    let (src_n, t_src) = normalize(src)?;
    let (dst_n, t_dst) = normalize(dst)?;
    if n == 4 {
        check_no_collinear_triple(&src_n)?;
        check_no_collinear_triple(&dst_n)?;
    }

    // Pad to 9 rows so the SVD always exposes the full right singular basis.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (s, d)) in src_n.iter().zip(&dst_n).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = 2 * k;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| {
        GeometryError::DegenerateConfiguration("SVD of the DLT system failed".into())
    })?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values[order[order.len() - 1]];
    let second = svd.singular_values[order[1]];
    if !(smax > 0.0) || second < RANK_TOLERANCE * smax {
        return Err(GeometryError::DegenerateConfiguration(
            "homography system is rank deficient".into(),
        ));
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::from_row_slice(&[h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]]);

    let t_dst_inv = t_dst.try_inverse().ok_or_else(|| {
        GeometryError::DegenerateConfiguration("normalization is not invertible".into())
    })?;
    let mut out = t_dst_inv * hn * t_src;
    let norm = out.norm();
    out /= norm;
    if out[(2, 2)] < 0.0 {
        out = -out;
    }
    if !(out.determinant().abs() > 1e-12) {
        return Err(GeometryError::DegenerateConfiguration(
            "fitted homography is singular".into(),
        ));
    }
    Ok(out)
}

/// Applies `h` to a point with perspective division. Returns `None` when the
/// homogeneous coordinate is below `1e-12` in magnitude.
pub fn apply_homography(h: &Matrix3<f64>, p: Point2<f64>) -> Option<Point2<f64>> {
    let q = h * Vector3::new(p.x, p.y, 1.0);
    if !(q.z.abs() >= 1e-12) {
        return None;
    }
    Some(Point2::new(q.x / q.z, q.y / q.z))
}

fn normalize(pts: &[Point2<f64>]) -> Result<(Vec<Point2<f64>>, Matrix3<f64>), GeometryError> {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mut cov = [0.0f64; 3];
    for p in pts {
        let (dx, dy) = (p.x - cx, p.y - cy);
        cov[0] += dx * dx;
        cov[1] += dx * dy;
        cov[2] += dy * dy;
    }
    let rms = ((cov[0] + cov[2]) / n).sqrt();
    if !(rms > 0.0) {
        return Err(GeometryError::DegenerateConfiguration(
            "all points coincide".into(),
        ));
    }
    // ratio of the covariance eigenvalues: zero for collinear sets
    let tr = cov[0] + cov[2];
    let det = cov[0] * cov[2] - cov[1] * cov[1];
    let disc = (tr * tr * 0.25 - det).max(0.0).sqrt();
    let (lmax, lmin) = (tr * 0.5 + disc, (tr * 0.5 - disc).max(0.0));
    if lmin < 1e-12 * lmax {
        return Err(GeometryError::DegenerateConfiguration(
            "points are collinear".into(),
        ));
    }
    let s = std::f64::consts::SQRT_2 / rms;
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let out = pts
        .iter()
        .map(|p| Point2::new(s * (p.x - cx), s * (p.y - cy)))
        .collect();
    Ok((out, t))
}

fn check_no_collinear_triple(pts: &[Point2<f64>]) -> Result<(), GeometryError> {
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let area = ((b - a).perp(&(c - a))).abs();
                if area < 1e-9 {
                    return Err(GeometryError::DegenerateConfiguration(format!(
                        "points {i}, {j}, {k} are collinear"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_all(h: &Matrix3<f64>, pts: &[Point2<f64>]) -> Vec<Point2<f64>> {
        pts.iter().map(|p| apply_homography(h, *p).unwrap()).collect()
    }

    #[test]
    fn unit_square_gives_identity() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let h = dlt_homography(&sq, &sq).unwrap();
        let h = h / h[(2, 2)];
        assert!((h - Matrix3::identity()).amax() < 1e-12);
    }

    #[test]
    fn recovers_synthetic_homography_up_to_scale() {
        let truth = Matrix3::new(1.2, 0.1, 30.0, -0.05, 0.9, -12.0, 1e-4, 2e-4, 1.0);
        let src: Vec<_> = [
            (10.0, 20.0),
            (400.0, 35.0),
            (380.0, 300.0),
            (25.0, 310.0),
            (200.0, 160.0),
            (120.0, 250.0),
        ]
        .iter()
        .map(|&(x, y)| Point2::new(x, y))
        .collect();
        let dst = map_all(&truth, &src);
        let h = dlt_homography(&src, &dst).unwrap();
        let tn = truth / truth.norm();
        assert!((h - tn).amax() < 1e-9, "{h} vs {tn}");
        for (m, d) in map_all(&h, &src).iter().zip(&dst) {
            assert!((m - d).norm() < 1e-9);
        }
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let line: Vec<_> = (0..4).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(matches!(
            dlt_homography(&line, &sq),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
        // three of four collinear
        let tri = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(dlt_homography(&tri, &sq).is_err());
        assert!(dlt_homography(&sq[..3], &sq[..3]).is_err());
    }

    #[test]
    fn divide_by_zero_is_reported() {
        let h = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0);
        assert!(apply_homography(&h, Point2::new(1.0, 5.0)).is_none());
    }
}
