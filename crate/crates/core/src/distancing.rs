//! Pairwise inter-personal distances and risk classes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::people::PersonMeasurement;
use crate::scaling::ScaleParams;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("risk thresholds must satisfy 0 < dangerous_below ({dangerous_below}) < safe_above ({safe_above})")]
pub struct InvalidThresholds {
    pub dangerous_below: f64,
    pub safe_above: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Risk {
    Safe,
    Risky,
    Dangerous,
}

impl Risk {
    pub const ALL: [Risk; 3] = [Risk::Safe, Risk::Risky, Risk::Dangerous];

    pub fn name(self) -> &'static str {
        match self {
            Risk::Safe => "safe",
            Risk::Risky => "risky",
            Risk::Dangerous => "dangerous",
        }
    }
}

/// Distances below `dangerous_below` are dangerous, above `safe_above` safe,
/// and the closed interval between them risky.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskThresholds {
    dangerous_below: f64,
    safe_above: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        Self {
            dangerous_below: 1.0,
            safe_above: 2.0,
        }
    }
}

impl RiskThresholds {
    pub fn new(dangerous_below: f64, safe_above: f64) -> Result<Self, InvalidThresholds> {
        if !(dangerous_below > 0.0 && dangerous_below < safe_above && safe_above.is_finite()) {
            return Err(InvalidThresholds {
                dangerous_below,
                safe_above,
            });
        }
        Ok(Self {
            dangerous_below,
            safe_above,
        })
    }

    pub fn dangerous_below(&self) -> f64 {
        self.dangerous_below
    }

    pub fn safe_above(&self) -> f64 {
        self.safe_above
    }
}

pub fn classify_risk(distance: f64, t: &RiskThresholds) -> Risk {
    if distance < t.dangerous_below {
        Risk::Dangerous
    } else if distance <= t.safe_above {
        Risk::Risky
    } else {
        Risk::Safe
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    /// Smaller instance id of the pair.
    pub id_a: u32,
    pub id_b: u32,
    pub distance: f64,
    pub risk: Risk,
}

impl PairDistance {
    /// Orders the ids so that `id_a < id_b`.
    pub fn new(a: u32, b: u32, distance: f64, t: &RiskThresholds) -> Self {
        Self {
            id_a: a.min(b),
            id_b: a.max(b),
            distance,
            risk: classify_risk(distance, t),
        }
    }
}

/// All unordered pairs of persons, sorted by `(id_a, id_b)`.
pub fn measure_frame(persons: &[PersonMeasurement], t: &RiskThresholds) -> Vec<PairDistance> {
    let mut out = Vec::with_capacity(persons.len() * persons.len().saturating_sub(1) / 2);
    for (i, a) in persons.iter().enumerate() {
        for b in &persons[i + 1..] {
            let d = (a.position - b.position).norm();
            out.push(PairDistance::new(a.instance_id, b.instance_id, d, t));
        }
    }
    out.sort_by_key(|p| (p.id_a, p.id_b));
    out
}

/// Everything measured on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub frame_id: String,
    pub scale: ScaleParams,
    pub control_points_used: usize,
    pub persons: Vec<PersonMeasurement>,
    pub pairs: Vec<PairDistance>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{transform_point, Point3, Pose};
    use crate::maps::GridPixel;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn person(id: u32, x: f64, y: f64, z: f64) -> PersonMeasurement {
        PersonMeasurement {
            instance_id: id,
            centroid: GridPixel::new(0, 0),
            position: Point3::new(x, y, z),
        }
    }

    #[test]
    fn risk_classes_with_closed_middle_interval() {
        let t = RiskThresholds::default();
        assert_eq!(classify_risk(2.5, &t), Risk::Safe);
        assert_eq!(classify_risk(1.5, &t), Risk::Risky);
        assert_eq!(classify_risk(0.5, &t), Risk::Dangerous);
        assert_eq!(classify_risk(2.0, &t), Risk::Risky);
        assert_eq!(classify_risk(1.0, &t), Risk::Risky);
        assert_eq!(classify_risk(0.0, &t), Risk::Dangerous);
    }

    #[test]
    fn thresholds_validation() {
        assert!(RiskThresholds::new(2.0, 1.0).is_err());
        assert!(RiskThresholds::new(0.0, 1.0).is_err());
        assert!(RiskThresholds::new(1.5, 3.0).is_ok());
    }

    #[test]
    fn pair_enumeration() {
        let t = RiskThresholds::default();
        let pairs = measure_frame(&[person(1, 0.0, 0.0, 0.0), person(2, 3.0, 4.0, 0.0)], &t);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].distance, 5.0);
        assert_eq!(pairs[0].risk, Risk::Safe);
        assert!(measure_frame(&[person(1, 0.0, 0.0, 1.0)], &t).is_empty());
        let three = [person(3, 0.0, 0.0, 1.0), person(1, 1.0, 0.0, 1.0), person(2, 0.0, 1.5, 1.0)];
        let pairs = measure_frame(&three, &t);
        let keys: Vec<_> = pairs.iter().map(|p| (p.id_a, p.id_b)).collect();
        assert_eq!(keys, vec![(1, 2), (1, 3), (2, 3)]);
    }

    proptest! {
        #[test]
        fn distances_are_symmetric_and_rigid(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.5f64..20.0), 0..8),
            w in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
            tr in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
        ) {
            let t = RiskThresholds::default();
            let persons: Vec<_> = pts.iter().enumerate().map(|(i, p)| person(i as u32 + 1, p.0, p.1, p.2)).collect();
            let pairs = measure_frame(&persons, &t);
            let n = persons.len();
            prop_assert_eq!(pairs.len(), n * n.saturating_sub(1) / 2);
            let mut rev = persons.clone();
            rev.reverse();
            prop_assert_eq!(&measure_frame(&rev, &t), &pairs);
            let pose = Pose::from_axis_angle(Vector3::new(w.0, w.1, w.2), Vector3::new(tr.0, tr.1, tr.2));
            let moved: Vec<_> = persons.iter().map(|p| PersonMeasurement { position: transform_point(&pose, &p.position), ..*p }).collect();
            for (a, b) in measure_frame(&moved, &t).iter().zip(&pairs) {
                prop_assert!((a.distance - b.distance).abs() < 1e-9);
            }
        }

        #[test]
        fn classes_partition_the_half_line(d in 0.0f64..100.0) {
            let t = RiskThresholds::default();
            let hits = [d < 1.0, (1.0..=2.0).contains(&d), d > 2.0];
            prop_assert_eq!(hits.iter().filter(|h| **h).count(), 1);
            let expected = if hits[0] { Risk::Dangerous } else if hits[1] { Risk::Risky } else { Risk::Safe };
            prop_assert_eq!(classify_risk(d, &t), expected);
        }
    }
}
