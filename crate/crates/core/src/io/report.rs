//! JSON form of [`FrameReport`] and key-sorted JSON output.

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::distancing::{FrameReport, PairDistance, Risk};
use crate::geometry::Point3;
use crate::maps::GridPixel;
use crate::people::PersonMeasurement;
use crate::scaling::ScaleParams;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportDoc {
    frame_id: String,
    scale: ScaleDoc,
    control_points_used: usize,
    persons: Vec<PersonDoc>,
    pairs: Vec<PairDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleDoc {
    alpha: f64,
    beta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersonDoc {
    id: u32,
    centroid: [u32; 2],
    position: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    a: u32,
    b: u32,
    distance_m: f64,
    risk: Risk,
}

/// Pretty JSON with object keys in lexicographic order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String, FormatError> {
    // serde_json::Value objects are BTreeMap-backed, so going through a Value sorts keys
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)?)
}

pub fn report_to_json(r: &FrameReport) -> Result<String, FormatError> {
    let doc = ReportDoc {
        frame_id: r.frame_id.clone(),
        scale: ScaleDoc {
            alpha: r.scale.alpha,
            beta: r.scale.beta,
        },
        control_points_used: r.control_points_used,
        persons: r
            .persons
            .iter()
            .map(|p| PersonDoc {
                id: p.instance_id,
                centroid: [p.centroid.u, p.centroid.v],
                position: [p.position.x, p.position.y, p.position.z],
            })
            .collect(),
        pairs: r
            .pairs
            .iter()
            .map(|p| PairDoc {
                a: p.id_a,
                b: p.id_b,
                distance_m: p.distance,
                risk: p.risk,
            })
            .collect(),
    };
    to_sorted_json(&doc)
}

pub fn report_from_json(s: &str) -> Result<FrameReport, FormatError> {
    let doc: ReportDoc = serde_json::from_str(s)?;
    let scale = ScaleParams::new(doc.scale.alpha, doc.scale.beta)
        .map_err(|e| FormatError::MalformedPayload(e.to_string()))?;
    Ok(FrameReport {
        frame_id: doc.frame_id,
        scale,
        control_points_used: doc.control_points_used,
        persons: doc
            .persons
            .into_iter()
            .map(|p| PersonMeasurement {
                instance_id: p.id,
                centroid: GridPixel::new(p.centroid[0], p.centroid[1]),
                position: Point3::new(p.position[0], p.position[1], p.position[2]),
            })
            .collect(),
        pairs: doc
            .pairs
            .into_iter()
            .map(|p| PairDistance {
                id_a: p.a,
                id_b: p.b,
                distance: p.distance_m,
                risk: p.risk,
            })
            .collect(),
    })
}

#[derive(Debug, Deserialize)]
struct PairsOnlyDoc {
    frame_id: String,
    pairs: Vec<PairDoc>,
}

/// Frame id and pairs of any report carrying the `frame_id` and `pairs`
/// fields; other fields are ignored.
pub fn report_pairs_from_json(s: &str) -> Result<(String, Vec<PairDistance>), FormatError> {
    let doc: PairsOnlyDoc = serde_json::from_str(s)?;
    let pairs = doc
        .pairs
        .into_iter()
        .map(|p| PairDistance {
            id_a: p.a,
            id_b: p.b,
            distance: p.distance_m,
            risk: p.risk,
        })
        .collect();
    Ok((doc.frame_id, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FrameReport {
        FrameReport {
            frame_id: "000017".into(),
            scale: ScaleParams::new(-0.05, 0.5).unwrap(),
            control_points_used: 12,
            persons: vec![
                PersonMeasurement {
                    instance_id: 1,
                    centroid: GridPixel::new(300, 250),
                    position: Point3::new(-1.0, 0.25, 5.0),
                },
                PersonMeasurement {
                    instance_id: 2,
                    centroid: GridPixel::new(700, 250),
                    position: Point3::new(1.0, 0.25, 5.0),
                },
            ],
            pairs: vec![PairDistance {
                id_a: 1,
                id_b: 2,
                distance: 2.0,
                risk: Risk::Risky,
            }],
        }
    }

    #[test]
    fn schema_and_key_order() {
        let s = report_to_json(&sample()).unwrap();
        let keys = ["\"control_points_used\"", "\"frame_id\"", "\"pairs\"", "\"persons\"", "\"scale\""];
        let pos: Vec<usize> = keys.iter().map(|k| s.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(s.contains("\"distance_m\": 2.0"));
        assert!(s.contains("\"risk\": \"risky\""));
        assert!(s.contains("\"centroid\": [\n        300,\n        250\n      ]"));
    }

    #[test]
    fn round_trip() {
        let r = sample();
        let s = report_to_json(&r).unwrap();
        assert_eq!(report_from_json(&s).unwrap(), r);
        assert_eq!(report_to_json(&report_from_json(&s).unwrap()).unwrap(), s);
        let (id, pairs) = report_pairs_from_json(&s).unwrap();
        assert_eq!((id.as_str(), pairs), ("000017", r.pairs));
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(report_from_json("{}").is_err());
        assert!(report_from_json("not json").is_err());
        let s = report_to_json(&sample()).unwrap().replace("risky", "unsafe");
        assert!(report_from_json(&s).is_err());
    }
}
