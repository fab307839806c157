//! Per-frame processing: rescale relative depth with the control points,
//! localize every person and measure all pairs.

use log::warn;
use thiserror::Error;

use crate::calibration::ControlPoint;
use crate::distancing::{measure_frame, FrameReport, Risk, RiskThresholds};
use crate::geometry::CameraIntrinsics;
use crate::io::RgbImage;
use crate::maps::{same_dims, InstanceMask, InverseDepthMap, MapError, MetricDepthMap};
use crate::people::{filter_occluded_control_points, localize_all, PeopleError, DEFAULT_MIN_PIXELS};
use crate::scaling::{apply_scale, build_correspondences, fit_scale_trimmed, ScaleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Dimensions(#[from] MapError),
    #[error("control point ({u}, {v}) lies outside the {width}x{height} frame")]
    ControlPointOutOfBounds { u: u32, v: u32, width: u32, height: u32 },
    #[error("scaling impossible: {usable} control points left after occlusion filtering, need 2")]
    ScalingImpossible { usable: usize },
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub thresholds: RiskThresholds,
    pub min_pixels: usize,
    /// Fraction of worst-fitting control points dropped before refitting.
    pub trim_fraction: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            thresholds: RiskThresholds::default(),
            min_pixels: DEFAULT_MIN_PIXELS,
            trim_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub report: FrameReport,
    pub metric: MetricDepthMap,
    /// People that could not be localized.
    pub skipped: Vec<PeopleError>,
}

pub fn process_frame(
    frame_id: &str,
    relative: &InverseDepthMap,
    mask: &InstanceMask,
    control_points: &[ControlPoint],
    k: &CameraIntrinsics,
    opts: &PipelineOptions,
) -> Result<FrameOutput, PipelineError> {
    let dims = (relative.width(), relative.height());
    same_dims(dims, (mask.width(), mask.height()))?;
    same_dims(dims, (k.width(), k.height()))?;
    if let Some(cp) = control_points.iter().find(|cp| cp.pixel.u >= dims.0 || cp.pixel.v >= dims.1) {
        return Err(PipelineError::ControlPointOutOfBounds {
            u: cp.pixel.u,
            v: cp.pixel.v,
            width: dims.0,
            height: dims.1,
        });
    }
    let usable = filter_occluded_control_points(control_points, mask);
    if usable.len() < 2 {
        return Err(PipelineError::ScalingImpossible { usable: usable.len() });
    }
    let pairs = build_correspondences(&usable, relative);
    let scale = fit_scale_trimmed(&pairs, opts.trim_fraction)?;
    let metric = apply_scale(relative, &scale);
    let (persons, skipped) = localize_all(mask, &metric, k, opts.min_pixels);
    for e in &skipped {
        warn!("frame {frame_id}: {e}");
    }
    let pairs = measure_frame(&persons, &opts.thresholds);
    Ok(FrameOutput {
        report: FrameReport {
            frame_id: frame_id.to_string(),
            scale,
            control_points_used: usable.len(),
            persons,
            pairs,
        },
        metric,
        skipped,
    })
}

pub fn risk_color(r: Risk) -> [u8; 3] {
    match r {
        Risk::Safe => [0, 200, 0],
        Risk::Risky => [230, 200, 0],
        Risk::Dangerous => [220, 0, 0],
    }
}

fn instance_tint(id: u32) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 6] = [
        [66, 135, 245],
        [245, 66, 200],
        [66, 245, 227],
        [245, 150, 66],
        [155, 66, 245],
        [180, 245, 66],
    ];
    PALETTE[(id as usize - 1) % PALETTE.len()]
}

/// Grayscale relative depth with people tinted and pair lines drawn
/// between centroids in their risk color.
pub fn render_overlay(relative: &InverseDepthMap, mask: &InstanceMask, report: &FrameReport) -> RgbImage {
    let (lo, hi) = relative
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let data = relative
        .values()
        .iter()
        .zip(mask.labels())
        .map(|(&x, &l)| {
            let g = ((x - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8;
            if l == 0 {
                [g, g, g]
            } else {
                let t = instance_tint(l);
                [0, 1, 2].map(|c| ((g as u16 + t[c] as u16) / 2) as u8)
            }
        })
        .collect();
    let mut img = RgbImage::new(relative.width(), relative.height(), data).expect("same raster size");
    for p in &report.pairs {
        let a = report.persons.iter().find(|m| m.instance_id == p.id_a);
        let b = report.persons.iter().find(|m| m.instance_id == p.id_b);
        if let (Some(a), Some(b)) = (a, b) {
            draw_line(&mut img, a.centroid.u as i64, a.centroid.v as i64, b.centroid.u as i64, b.centroid.v as i64, risk_color(p.risk));
        }
    }
    img
}

fn draw_line(img: &mut RgbImage, mut x0: i64, mut y0: i64, x1: i64, y1: i64, c: [u8; 3]) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        img.put(x0, y0, c);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::GridPixel;
    use crate::synth::{generate_scene, SceneSpec};

    #[test]
    fn recovers_ground_truth_on_a_synthetic_scene() {
        let s = generate_scene(&SceneSpec::visible_ground(21)).unwrap();
        let out = process_frame("f", &s.relative, &s.mask, &s.control_points, &s.intrinsics, &PipelineOptions::default()).unwrap();
        assert_eq!(out.report.pairs.len(), s.truth.pairs.len());
        for (p, t) in out.report.pairs.iter().zip(&s.truth.pairs) {
            assert_eq!((p.id_a, p.id_b), (t.id_a, t.id_b));
            assert!((p.distance - t.distance).abs() < 1e-6);
        }
        assert!((out.report.scale.beta - s.hidden.scale.beta).abs() < 1e-9 * s.hidden.scale.beta.abs());
    }

    #[test]
    fn one_person_has_no_pairs() {
        let spec = SceneSpec { people: 1, ..SceneSpec::visible_ground(4) };
        let s = generate_scene(&spec).unwrap();
        let out = process_frame("f", &s.relative, &s.mask, &s.control_points, &s.intrinsics, &PipelineOptions::default()).unwrap();
        assert_eq!(out.report.persons.len(), 1);
        assert!(out.report.pairs.is_empty());
    }

    #[test]
    fn fully_occluded_control_points() {
        let s = generate_scene(&SceneSpec::visible_ground(4)).unwrap();
        let mut mask = s.mask.clone();
        for cp in &s.control_points {
            mask.set(cp.pixel, 9);
        }
        let r = process_frame("f", &s.relative, &mask, &s.control_points, &s.intrinsics, &PipelineOptions::default());
        assert_eq!(r, Err(PipelineError::ScalingImpossible { usable: 0 }));
    }

    #[test]
    fn dimension_and_bounds_checks() {
        let s = generate_scene(&SceneSpec::visible_ground(4)).unwrap();
        let small = InstanceMask::empty(10, 10);
        assert!(matches!(
            process_frame("f", &s.relative, &small, &s.control_points, &s.intrinsics, &PipelineOptions::default()),
            Err(PipelineError::Dimensions(_))
        ));
        let mut cps = s.control_points.clone();
        cps.push(ControlPoint::new(GridPixel::new(5000, 1), 2.0).unwrap());
        assert!(matches!(
            process_frame("f", &s.relative, &s.mask, &cps, &s.intrinsics, &PipelineOptions::default()),
            Err(PipelineError::ControlPointOutOfBounds { .. })
        ));
    }

    #[test]
    fn overlay_draws_pair_lines() {
        let s = generate_scene(&SceneSpec::two_people_two_meters(1)).unwrap();
        let out = process_frame("f", &s.relative, &s.mask, &s.control_points, &s.intrinsics, &PipelineOptions::default()).unwrap();
        let img = render_overlay(&s.relative, &s.mask, &out.report);
        assert_eq!(out.report.pairs[0].risk, Risk::Risky);
        assert_eq!(img.get(500, 419), risk_color(Risk::Risky));
        assert_ne!(img.get(300, 250), img.get(10, 10));
    }
}
