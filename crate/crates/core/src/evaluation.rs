//! Accuracy of predicted inter-personal distances against reference depth:
//! mean absolute error and per-risk-class precision, recall and F1.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distancing::{classify_risk, measure_frame, PairDistance, Risk, RiskThresholds};
use crate::geometry::CameraIntrinsics;
use crate::maps::{same_dims, InstanceMask, MapError, ReferenceDepthMap};
use crate::people::{localize_all, PeopleError};

/// Default upper bound on the reference distance for the short-range MAE.
pub const DEFAULT_MAX_REF_DISTANCE: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no predicted pair has a matching reference pair")]
    NoMatchedPairs,
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A pair distance tagged with the frame it was measured on.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub frame_id: String,
    pub pair: PairDistance,
}

impl LabeledPair {
    pub fn tag(frame_id: &str, pairs: &[PairDistance]) -> Vec<LabeledPair> {
        pairs
            .iter()
            .map(|p| LabeledPair {
                frame_id: frame_id.to_owned(),
                pair: *p,
            })
            .collect()
    }
}

/// Reference measurements for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePairs {
    pub pairs: Vec<PairDistance>,
    /// Instances without any valid reference depth, left out of `pairs`.
    pub dropped: Vec<u32>,
}

/// Applies the centroid, back-projection and pairing procedure to the
/// reference depth map.
pub fn reference_distances(
    mask: &InstanceMask,
    reference: &ReferenceDepthMap,
    k: &CameraIntrinsics,
    t: &RiskThresholds,
    min_pixels: usize,
) -> Result<ReferencePairs, EvalError> {
    same_dims(
        (mask.width(), mask.height()),
        (reference.width(), reference.height()),
    )?;
    let (persons, failed) = localize_all(mask, reference, k, min_pixels);
    let dropped = failed
        .into_iter()
        .map(|e| match e {
            PeopleError::EmptyInstance(id) | PeopleError::NoValidDepth(id) => id,
        })
        .collect();
    Ok(ReferencePairs {
        pairs: measure_frame(&persons, t),
        dropped,
    })
}

/// `(predicted, reference)` distances for every predicted pair with a
/// reference counterpart, in predicted order.
pub fn match_pairs(predicted: &[LabeledPair], reference: &[LabeledPair]) -> Vec<(f64, f64)> {
    let index: HashMap<(&str, u32, u32), f64> = reference
        .iter()
        .map(|r| ((r.frame_id.as_str(), r.pair.id_a, r.pair.id_b), r.pair.distance))
        .collect();
    predicted
        .iter()
        .filter_map(|p| {
            index
                .get(&(p.frame_id.as_str(), p.pair.id_a, p.pair.id_b))
                .map(|&r| (p.pair.distance, r))
        })
        .collect()
}

/// Mean absolute distance error over matched pairs whose reference distance
/// is at most `max_ref_distance` (inclusive); no filter when `None`.
pub fn compute_mae(
    predicted: &[LabeledPair],
    reference: &[LabeledPair],
    max_ref_distance: Option<f64>,
) -> Result<f64, EvalError> {
    let matched: Vec<(f64, f64)> = match_pairs(predicted, reference)
        .into_iter()
        .filter(|&(_, r)| max_ref_distance.is_none_or(|m| r <= m))
        .collect();
    if matched.is_empty() {
        return Err(EvalError::NoMatchedPairs);
    }
    Ok(matched.iter().map(|(p, r)| (p - r).abs()).sum::<f64>() / matched.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Set when the metric is 0/0 and its value was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl ClassMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: f64, den: f64| if den == 0.0 { (0.0, true) } else { (num / den, false) };
        let (precision, pu) = ratio(tp as f64, (tp + fp) as f64);
        let (recall, ru) = ratio(tp as f64, (tp + fn_) as f64);
        let (f1, fu) = ratio(2.0 * precision * recall, precision + recall);
        Self {
            precision,
            recall,
            f1,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision_undefined: pu,
            recall_undefined: ru,
            f1_undefined: fu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub safe: ClassMetrics,
    pub risky: ClassMetrics,
    pub dangerous: ClassMetrics,
}

impl ClassReport {
    pub fn get(&self, r: Risk) -> &ClassMetrics {
        match r {
            Risk::Safe => &self.safe,
            Risk::Risky => &self.risky,
            Risk::Dangerous => &self.dangerous,
        }
    }
}

/// One-vs-rest precision, recall and F1 for each risk class, with classes
/// assigned from the distances by the same thresholds on both sides.
pub fn compute_prf(
    predicted: &[LabeledPair],
    reference: &[LabeledPair],
    t: &RiskThresholds,
) -> Result<ClassReport, EvalError> {
    let matched = match_pairs(predicted, reference);
    if matched.is_empty() {
        return Err(EvalError::NoMatchedPairs);
    }
    let mut counts = [[0usize; 3]; 3];
    for (p, r) in &matched {
        let (pc, rc) = (classify_risk(*p, t), classify_risk(*r, t));
        for (i, class) in Risk::ALL.iter().enumerate() {
            match (pc == *class, rc == *class) {
                (true, true) => counts[i][0] += 1,
                (true, false) => counts[i][1] += 1,
                (false, true) => counts[i][2] += 1,
                (false, false) => {}
            }
        }
    }
    let m = |i: usize| ClassMetrics::from_counts(counts[i][0], counts[i][1], counts[i][2]);
    Ok(ClassReport {
        safe: m(0),
        risky: m(1),
        dangerous: m(2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedInstance {
    pub frame_id: String,
    pub id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mae_any: f64,
    /// `None` when no matched pair lies within `max_ref_distance`.
    pub mae_below: Option<f64>,
    pub max_ref_distance: f64,
    pub pair_count: usize,
    pub pairs_below: usize,
    pub classes: ClassReport,
    pub dropped_instances: Vec<DroppedInstance>,
}

pub fn summarize(
    predicted: &[LabeledPair],
    reference: &[LabeledPair],
    t: &RiskThresholds,
    max_ref_distance: f64,
    dropped_instances: Vec<DroppedInstance>,
) -> Result<EvalSummary, EvalError> {
    let matched = match_pairs(predicted, reference);
    let mae_any = compute_mae(predicted, reference, None)?;
    let mae_below = match compute_mae(predicted, reference, Some(max_ref_distance)) {
        Ok(m) => Some(m),
        Err(EvalError::NoMatchedPairs) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalSummary {
        mae_any,
        mae_below,
        max_ref_distance,
        pair_count: matched.len(),
        pairs_below: matched.iter().filter(|(_, r)| *r <= max_ref_distance).count(),
        classes: compute_prf(predicted, reference, t)?,
        dropped_instances,
    })
}

/// Plain-text rendering of a summary: an MAE table followed by a
/// per-class detection table. Undefined cells print as `x`.
pub fn render_table(s: &EvalSummary) -> String {
    let mut out = String::new();
    let below = s
        .mae_below
        .map_or_else(|| "x".to_owned(), |m| format!("{m:.4}"));
    let cap = format!("<= {:.2} m", s.max_ref_distance);
    writeln!(out, "Inter-personal distance MAE (m)").unwrap();
    writeln!(out, "{:<10}{:>12}{:>12}", "pairs", "any", cap).unwrap();
    writeln!(out, "{:<10}{:>12}{:>12}", s.pair_count, format!("{:.4}", s.mae_any), below).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "Violation detection").unwrap();
    writeln!(out, "{:<10}{:>8}{:>8}{:>8}", "class", "P", "R", "F").unwrap();
    for r in Risk::ALL {
        let m = s.classes.get(r);
        let cell = |v: f64, undefined: bool| if undefined { "x".to_owned() } else { format!("{v:.3}") };
        writeln!(
            out,
            "{:<10}{:>8}{:>8}{:>8}",
            r.name(),
            cell(m.precision, m.precision_undefined),
            cell(m.recall, m.recall_undefined),
            cell(m.f1, m.f1_undefined)
        )
        .unwrap();
    }
    out
}
