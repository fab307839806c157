//! Affine alignment of relative inverse depth to metric inverse depth.
//!
//! A monocular network predicts `x`, proportional to inverse depth up to an
//! unknown offset and slope. Control points give metric inverse depths `y`,
//! and the least-squares line `y = alpha + beta * x` maps the whole map into
//! metric space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::ControlPoint;
use crate::maps::{InverseDepthMap, MetricDepthMap};

/// Scaled inverse depths at or below this (1/m) are marked invalid.
pub const INVDEPTH_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("need at least 2 correspondences, got {0}")]
    InsufficientPoints(usize),
    #[error("all relative inverse depths are equal; the normal equations are singular")]
    SingularSystem,
    #[error("fitted slope is zero")]
    ZeroSlope,
    #[error("invalid correspondence: {0}")]
    InvalidCorrespondence(String),
    #[error("trim fraction {0} outside [0, 1)")]
    InvalidTrim(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    /// Offset, 1/m.
    pub alpha: f64,
    /// Slope, 1/m per unit of relative inverse depth.
    pub beta: f64,
}

impl ScaleParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ScaleError> {
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(ScaleError::SingularSystem);
        }
        if beta == 0.0 {
            return Err(ScaleError::ZeroSlope);
        }
        Ok(Self { alpha, beta })
    }

    /// Metric inverse depth for a relative value.
    pub fn inverse_depth(&self, x: f64) -> f64 {
        self.alpha + self.beta * x
    }

    /// Metric depth for a relative value, `None` when the scaled inverse
    /// depth is not above [`INVDEPTH_EPSILON`].
    pub fn depth(&self, x: f64) -> Option<f64> {
        let y = self.inverse_depth(x);
        (y > INVDEPTH_EPSILON).then(|| 1.0 / y)
    }
}

/// A relative inverse depth paired with a metric inverse depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub x: f64,
    pub y: f64,
}

impl Correspondence {
    pub fn new(x: f64, y: f64) -> Result<Self, ScaleError> {
        if !x.is_finite() || !(y.is_finite() && y > 0.0) {
            return Err(ScaleError::InvalidCorrespondence(format!("x={x} y={y}")));
        }
        Ok(Self { x, y })
    }
}

/// Pairs every control point with the relative value under it.
pub fn build_correspondences(points: &[ControlPoint], rel: &InverseDepthMap) -> Vec<Correspondence> {
    points
        .iter()
        .map(|cp| Correspondence {
            x: rel.get(cp.pixel),
            y: 1.0 / cp.depth,
        })
        .collect()
}

/// Closed-form least-squares line through the correspondences.
///
/// Solves the 2x2 normal equations on mean-centered data, which gives the
/// same line as the uncentered system with much better conditioning.
pub fn fit_scale(pairs: &[Correspondence]) -> Result<ScaleParams, ScaleError> {
    let n = pairs.len();
    if n < 2 {
        return Err(ScaleError::InsufficientPoints(n));
    }
    let first = pairs[0].x;
    if pairs.iter().all(|p| p.x == first) {
        return Err(ScaleError::SingularSystem);
    }
    let nf = n as f64;
    let mean_x = pairs.iter().map(|p| p.x).sum::<f64>() / nf;
    let mean_y = pairs.iter().map(|p| p.y).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in pairs {
        let dx = p.x - mean_x;
        sxx += dx * dx;
        sxy += dx * (p.y - mean_y);
    }
    if !(sxx > 0.0) {
        return Err(ScaleError::SingularSystem);
    }
    let beta = sxy / sxx;
    let alpha = mean_y - beta * mean_x;
    ScaleParams::new(alpha, beta)
}

/// Fits once, drops the `fraction` of pairs with the largest absolute
/// residuals, and refits. `fraction == 0` is a plain fit.
pub fn fit_scale_trimmed(pairs: &[Correspondence], fraction: f64) -> Result<ScaleParams, ScaleError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(ScaleError::InvalidTrim(fraction));
    }
    let first = fit_scale(pairs)?;
    let drop = (fraction * pairs.len() as f64).floor() as usize;
    if drop == 0 {
        return Ok(first);
    }
    let mut ranked: Vec<(f64, usize)> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| ((p.y - first.inverse_depth(p.x)).abs(), i))
        .collect();
    // stable on ties so the kept set does not depend on sort internals
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut keep: Vec<usize> = ranked[..pairs.len() - drop].iter().map(|r| r.1).collect();
    keep.sort_unstable();
    let kept: Vec<Correspondence> = keep.iter().map(|&i| pairs[i]).collect();
    fit_scale(&kept)
}

/// Applies the line to every pixel and converts back to depth.
pub fn apply_scale(rel: &InverseDepthMap, s: &ScaleParams) -> MetricDepthMap {
    let values = rel
        .values()
        .iter()
        .map(|&x| s.depth(x).unwrap_or(MetricDepthMap::INVALID))
        .collect();
    MetricDepthMap::new(rel.width(), rel.height(), values).expect("dimensions preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::GridPixel;
    use proptest::prelude::*;

    fn c(x: f64, y: f64) -> Correspondence {
        Correspondence::new(x, y).unwrap()
    }

    /// Uncentered normal equations with an explicit 2x2 inverse.
    fn oracle(pairs: &[Correspondence]) -> (f64, f64) {
        let n = pairs.len() as f64;
        let sx: f64 = pairs.iter().map(|p| p.x).sum();
        let sxx: f64 = pairs.iter().map(|p| p.x * p.x).sum();
        let sy: f64 = pairs.iter().map(|p| p.y).sum();
        let sxy: f64 = pairs.iter().map(|p| p.x * p.y).sum();
        let det = n * sxx - sx * sx;
        ((sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det)
    }

    #[test]
    fn correspondences_take_reciprocal_depth() {
        let rel = InverseDepthMap::new(2, 1, vec![0.3, 0.7]).unwrap();
        let cps = [
            ControlPoint::new(GridPixel::new(1, 0), 2.0).unwrap(),
            ControlPoint::new(GridPixel::new(0, 0), 1.0).unwrap(),
        ];
        let out = build_correspondences(&cps, &rel);
        assert_eq!(out, vec![c(0.7, 0.5), c(0.3, 1.0)]);
        assert!(build_correspondences(&[], &rel).is_empty());
    }

    #[test]
    fn exact_lines() {
        let s = fit_scale(&[c(0.5, 0.5), c(1.0, 1.0)]).unwrap();
        assert!(s.alpha.abs() < 1e-15 && (s.beta - 1.0).abs() < 1e-15);
        let s = fit_scale(&[c(1.0, 3.0), c(2.0, 5.0)]).unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-15 && (s.beta - 2.0).abs() < 1e-15);
    }

    #[test]
    fn three_point_fit_matches_hand_solution() {
        // n=3, Σx=6, Σx²=14, Σy=10, Σxy=23 -> det=6, alpha=(14*10-6*23)/6=1/3,
        // beta=(3*23-6*10)/6=3/2
        let pairs = [c(1.0, 2.0), c(2.0, 3.0), c(3.0, 5.0)];
        let (oa, ob) = oracle(&pairs);
        assert!((oa - 1.0 / 3.0).abs() < 1e-15 && (ob - 1.5).abs() < 1e-15);
        let s = fit_scale(&pairs).unwrap();
        assert!((s.alpha - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.beta - 1.5).abs() < 1e-15);
        let r: Vec<f64> = pairs.iter().map(|p| p.y - s.inverse_depth(p.x)).collect();
        assert!(r.iter().sum::<f64>().abs() < 1e-12);
        assert!(pairs.iter().zip(&r).map(|(p, r)| p.x * r).sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(fit_scale(&[]), Err(ScaleError::InsufficientPoints(0)));
        assert_eq!(fit_scale(&[c(1.0, 1.0)]), Err(ScaleError::InsufficientPoints(1)));
        assert_eq!(
            fit_scale(&[c(0.3, 1.0), c(0.3, 2.0), c(0.3, 0.5)]),
            Err(ScaleError::SingularSystem)
        );
        assert_eq!(fit_scale(&[c(0.1, 1.0), c(0.2, 1.0)]), Err(ScaleError::ZeroSlope));
        assert!(Correspondence::new(1.0, 0.0).is_err());
    }

    #[test]
    fn apply_examples() {
        let rel = InverseDepthMap::new(3, 1, vec![0.5, 0.2, 0.0]).unwrap();
        let m = apply_scale(&rel, &ScaleParams::new(0.0, 1.0).unwrap());
        assert_eq!(m.depth(GridPixel::new(0, 0)), Some(2.0));
        assert_eq!(m.depth(GridPixel::new(2, 0)), None);
        let m = apply_scale(&rel, &ScaleParams::new(0.1, 2.0).unwrap());
        assert!((m.depth(GridPixel::new(1, 0)).unwrap() - 2.0).abs() < 1e-12);
        let m = apply_scale(&rel, &ScaleParams::new(-1.0, 1.0).unwrap());
        assert_eq!(m.depth(GridPixel::new(0, 0)), None);
    }

    #[test]
    fn trimming_removes_an_outlier() {
        let mut pairs: Vec<_> = (0..20).map(|i| c(i as f64 * 0.1, 0.2 + 0.5 * i as f64 * 0.1)).collect();
        pairs[7].y += 3.0;
        let plain = fit_scale(&pairs).unwrap();
        assert!((plain.beta - 0.5).abs() > 1e-3);
        let trimmed = fit_scale_trimmed(&pairs, 0.05).unwrap();
        assert!((trimmed.beta - 0.5).abs() < 1e-12);
        assert!((trimmed.alpha - 0.2).abs() < 1e-12);
        assert_eq!(fit_scale_trimmed(&pairs, 0.0).unwrap(), plain);
        assert!(fit_scale_trimmed(&pairs, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn fit_matches_oracle_and_is_orthogonal(
            raw in proptest::collection::vec((0.0f64..10.0, 0.01f64..5.0), 2..200)
        ) {
            let pairs: Vec<_> = raw.iter().map(|&(x, y)| c(x, y)).collect();
            prop_assume!(pairs.iter().any(|p| (p.x - pairs[0].x).abs() > 1e-3));
            let Ok(s) = fit_scale(&pairs) else { return Ok(()); };
            let (oa, ob) = oracle(&pairs);
            let scale = s.alpha.abs() + s.beta.abs() * 10.0;
            prop_assert!((s.alpha - oa).abs() <= 1e-9 * scale);
            prop_assert!((s.beta - ob).abs() <= 1e-9 * scale);
            let r: Vec<f64> = pairs.iter().map(|p| p.y - s.inverse_depth(p.x)).collect();
            let sy: f64 = pairs.iter().map(|p| p.y).sum();
            let sxy: f64 = pairs.iter().map(|p| p.x * p.y).sum();
            prop_assert!(r.iter().sum::<f64>().abs() <= 1e-9 * sy);
            prop_assert!(pairs.iter().zip(&r).map(|(p, r)| p.x * r).sum::<f64>().abs() <= 1e-9 * sxy);
        }

        #[test]
        fn fit_is_permutation_invariant(
            raw in proptest::collection::vec((0.0f64..10.0, 0.01f64..5.0), 3..50),
            rot in 0usize..50,
        ) {
            let pairs: Vec<_> = raw.iter().map(|&(x, y)| c(x, y)).collect();
            let Ok(a) = fit_scale(&pairs) else { return Ok(()); };
            let mut shuffled = pairs.clone();
            shuffled.rotate_left(rot % pairs.len());
            shuffled.reverse();
            let b = fit_scale(&shuffled).unwrap();
            let scale = a.alpha.abs() + a.beta.abs() * 10.0;
            prop_assert!((a.alpha - b.alpha).abs() <= 1e-9 * scale);
            prop_assert!((a.beta - b.beta).abs() <= 1e-9 * scale);
        }

        #[test]
        fn adding_a_point_on_the_line_keeps_the_fit(
            raw in proptest::collection::vec((0.0f64..10.0, 0.01f64..5.0), 3..50),
            xnew in 0.0f64..10.0,
        ) {
            let mut pairs: Vec<_> = raw.iter().map(|&(x, y)| c(x, y)).collect();
            let Ok(a) = fit_scale(&pairs) else { return Ok(()); };
            let y = a.inverse_depth(xnew);
            prop_assume!(y > 0.0);
            pairs.push(c(xnew, y));
            let b = fit_scale(&pairs).unwrap();
            let scale = a.alpha.abs() + a.beta.abs() * 10.0;
            prop_assert!((a.alpha - b.alpha).abs() <= 1e-9 * scale);
            prop_assert!((a.beta - b.beta).abs() <= 1e-9 * scale);
        }

        #[test]
        fn affine_recovery(
            depths in proptest::collection::vec(0.5f64..50.0, 12..64),
            a in 0.05f64..20.0,
            b_frac in -0.9f64..2.0,
            picks in proptest::collection::vec(0usize..64, 2..16),
        ) {
            // b chosen so that a / d + b > 0 for every d <= 50
            let b = b_frac * a / 50.0;
            let w = depths.len() as u32;
            let rel: Vec<f64> = depths.iter().map(|d| a / d + b).collect();
            let rel = InverseDepthMap::new(w, 1, rel).unwrap();
            let cps: Vec<ControlPoint> = picks
                .iter()
                .map(|&i| i % depths.len())
                .map(|i| ControlPoint::new(GridPixel::new(i as u32, 0), depths[i]).unwrap())
                .collect();
            let pairs = build_correspondences(&cps, &rel);
            let xs = pairs.iter().map(|p| p.x);
            let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
            prop_assume!(hi - lo > 0.01 * hi);
            let s = fit_scale(&pairs).unwrap();
            let out = apply_scale(&rel, &s);
            for (u, d) in depths.iter().enumerate() {
                let got = out.depth(GridPixel::new(u as u32, 0)).unwrap();
                prop_assert!((got - d).abs() <= 1e-6 * d, "pixel {} {} vs {}", u, got, d);
            }
        }

        #[test]
        fn validity_follows_the_sign(alpha in -2.0f64..2.0, beta in -2.0f64..2.0, x in -3.0f64..3.0) {
            prop_assume!(beta != 0.0);
            let s = ScaleParams::new(alpha, beta).unwrap();
            let rel = InverseDepthMap::new(1, 1, vec![x]).unwrap();
            let valid = apply_scale(&rel, &s).depth(GridPixel::new(0, 0)).is_some();
            prop_assert_eq!(valid, alpha + beta * x > INVDEPTH_EPSILON);
        }
    }
}
