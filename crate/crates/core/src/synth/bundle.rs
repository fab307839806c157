//! On-disk layout of a synthetic bundle.
//!
//! ```text
//! intrinsics.json  mobile_intrinsics.json  config.toml  truth.json
//! board_fixed.csv  board_mobile.csv  slam_points.csv  control_points.csv
//! ground.csv  frames/<id>.pfm  masks/<id>.pgm  reference/<id>.pfm
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::SceneBundle;
use crate::distancing::PairDistance;
use crate::io::{
    write_bytes, write_json, write_label_mask, write_pfm, write_points_csv, FloatMap, FormatError,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub root: PathBuf,
    pub config: PathBuf,
    pub intrinsics: PathBuf,
    pub mobile_intrinsics: PathBuf,
    pub board_fixed: PathBuf,
    pub board_mobile: PathBuf,
    pub slam_points: PathBuf,
    pub control_points: PathBuf,
    pub ground: PathBuf,
    pub frame: PathBuf,
    pub mask: PathBuf,
    pub reference: PathBuf,
    pub truth: PathBuf,
}

fn pairs_json(pairs: &[PairDistance]) -> Value {
    pairs
        .iter()
        .map(|p| json!({"a": p.id_a, "b": p.id_b, "distance_m": p.distance, "risk": p.risk}))
        .collect()
}

/// Hidden parameters and ground-truth distances of a bundle.
pub fn truth_json(s: &SceneBundle, frame_id: &str) -> Value {
    let persons: Vec<Value> = s
        .truth
        .persons
        .iter()
        .map(|p| {
            json!({
                "id": p.instance_id,
                "centroid": [p.centroid.u, p.centroid.v],
                "position": [p.position.x, p.position.y, p.position.z],
            })
        })
        .collect();
    json!({
        "frame_id": frame_id,
        "corruption": {"a": s.hidden.a, "b": s.hidden.b},
        "scale": {"alpha": s.hidden.scale.alpha, "beta": s.hidden.scale.beta},
        "mobile_to_fixed": s.hidden.mobile_to_fixed,
        "ground_visible": s.truth.ground_visible,
        "persons": persons,
        "pairs": pairs_json(&s.truth.pairs),
        "ground_pairs": pairs_json(&s.truth.ground_pairs),
    })
}

fn mkdir(p: &Path) -> Result<(), FormatError> {
    fs::create_dir_all(p).map_err(|source| FormatError::Io {
        path: p.to_owned(),
        source,
    })
}

pub fn write_bundle(dir: &Path, s: &SceneBundle, frame_id: &str) -> Result<BundlePaths, FormatError> {
    for sub in ["frames", "masks", "reference"] {
        mkdir(&dir.join(sub))?;
    }
    let paths = BundlePaths {
        root: dir.to_owned(),
        config: dir.join("config.toml"),
        intrinsics: dir.join("intrinsics.json"),
        mobile_intrinsics: dir.join("mobile_intrinsics.json"),
        board_fixed: dir.join("board_fixed.csv"),
        board_mobile: dir.join("board_mobile.csv"),
        slam_points: dir.join("slam_points.csv"),
        control_points: dir.join("control_points.csv"),
        ground: dir.join("ground.csv"),
        frame: dir.join("frames").join(format!("{frame_id}.pfm")),
        mask: dir.join("masks").join(format!("{frame_id}.pgm")),
        reference: dir.join("reference").join(format!("{frame_id}.pfm")),
        truth: dir.join("truth.json"),
    };
    write_json(&paths.intrinsics, &s.intrinsics)?;
    write_json(&paths.mobile_intrinsics, &s.mobile_intrinsics)?;
    write_points_csv(&paths.board_fixed, &s.board_fixed)?;
    write_points_csv(&paths.board_mobile, &s.board_mobile)?;
    write_points_csv(&paths.slam_points, &s.slam_points)?;
    write_points_csv(&paths.control_points, &s.control_points)?;
    write_points_csv(&paths.ground, &s.ground)?;
    write_pfm(&paths.frame, &FloatMap::from_inverse_depth(&s.relative))?;
    write_label_mask(&paths.mask, &s.mask)?;
    write_pfm(&paths.reference, &FloatMap::from_metric_depth(&s.metric))?;
    write_json(&paths.truth, &truth_json(s, frame_id))?;
    let config = "fixed_intrinsics = \"intrinsics.json\"\n\
                  mobile_intrinsics = \"mobile_intrinsics.json\"\n\
                  control_points = \"control_points.csv\"\n\
                  frames = \"frames/{id}.pfm\"\n\
                  masks = \"masks/{id}.pgm\"\n";
    write_bytes(&paths.config, config.as_bytes())?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{read_inverse_depth, read_label_mask, read_control_points, PipelineConfig};
    use crate::synth::{generate_scene, SceneSpec};

    #[test]
    fn bundle_files_parse_back() {
        let s = generate_scene(&SceneSpec::visible_ground(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = write_bundle(dir.path(), &s, "0001").unwrap();
        assert_eq!(read_label_mask(&p.mask).unwrap(), s.mask);
        assert_eq!(read_control_points(&p.control_points).unwrap(), s.control_points);
        let rel = read_inverse_depth(&p.frame).unwrap();
        for (a, b) in rel.values().iter().zip(s.relative.values()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        let cfg = PipelineConfig::load(&p.config).unwrap();
        assert_eq!(cfg.control_points.unwrap(), p.control_points);
        let truth: Value = serde_json::from_slice(&fs::read(&p.truth).unwrap()).unwrap();
        assert_eq!(truth["pairs"].as_array().unwrap().len(), s.truth.pairs.len());
    }
}
