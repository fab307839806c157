//! Pipeline and baseline driven from bundle files on disk.

use proptest::prelude::*;

use socdist::baseline::{baseline_pairs, baseline_positions, fit_from_correspondences, GroundCorrespondence};
use socdist::distancing::{FrameReport, PairDistance};
use socdist::geometry::CameraIntrinsics;
use socdist::io::{
    read_control_points, read_inverse_depth, read_json, read_label_mask, read_points_csv, report_from_json,
    report_to_json, PipelineConfig,
};
use socdist::people::DEFAULT_MIN_PIXELS;
use socdist::pipeline::{process_frame, PipelineOptions};
use socdist::synth::{generate_scene, write_bundle, SceneSpec};

fn assert_pairs_close(got: &[PairDistance], want: &[PairDistance], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert_eq!((g.id_a, g.id_b), (w.id_a, w.id_b));
        assert!((g.distance - w.distance).abs() < tol, "{} vs {}", g.distance, w.distance);
    }
}

fn run_from_files(seed: u64) -> (FrameReport, Vec<PairDistance>) {
    let s = generate_scene(&SceneSpec::visible_ground(seed)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = write_bundle(dir.path(), &s, "f").unwrap();
    let cfg = PipelineConfig::load(&p.config).unwrap();
    let k: CameraIntrinsics = read_json(cfg.fixed_intrinsics.as_ref().unwrap()).unwrap();
    let report = process_frame(
        "f",
        &read_inverse_depth(&p.frame).unwrap(),
        &read_label_mask(&p.mask).unwrap(),
        &read_control_points(cfg.control_points.as_ref().unwrap()).unwrap(),
        &k,
        &PipelineOptions::default(),
    )
    .unwrap()
    .report;
    (report, s.truth.pairs)
}

#[test]
fn file_round_trip_matches_truth() {
    for seed in 0..5 {
        let (report, truth) = run_from_files(seed);
        // relative depth is stored as f32
        assert_pairs_close(&report.pairs, &truth, 1e-4);
        let back = report_from_json(&report_to_json(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }
}

#[test]
fn baseline_from_ground_file() {
    let s = generate_scene(&SceneSpec::visible_ground(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = write_bundle(dir.path(), &s, "f").unwrap();
    let ground: Vec<GroundCorrespondence> = read_points_csv(&p.ground).unwrap();
    let h = fit_from_correspondences(&ground).unwrap();
    let positions = baseline_positions(&read_label_mask(&p.mask).unwrap(), &h, DEFAULT_MIN_PIXELS).unwrap();
    let pairs = baseline_pairs(&positions, &PipelineOptions::default().thresholds);
    assert_pairs_close(&pairs, &s.truth.ground_pairs, 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn control_point_order_does_not_matter(seed in 0u64..1000, rot in 1usize..30) {
        let s = generate_scene(&SceneSpec::visible_ground(seed)).unwrap();
        let opts = PipelineOptions::default();
        let a = process_frame("p", &s.relative, &s.mask, &s.control_points, &s.intrinsics, &opts).unwrap().report;
        let mut cps = s.control_points.clone();
        let len = cps.len();
        cps.rotate_left(rot % len);
        cps.reverse();
        let b = process_frame("p", &s.relative, &s.mask, &cps, &s.intrinsics, &opts).unwrap().report;
        prop_assert_eq!(a.pairs.len(), b.pairs.len());
        for (x, y) in a.pairs.iter().zip(&b.pairs) {
            prop_assert_eq!((x.id_a, x.id_b, x.risk), (y.id_a, y.id_b, y.risk));
            prop_assert!((x.distance - y.distance).abs() < 1e-9);
        }
    }

    #[test]
    fn pairs_cover_every_person_once(seed in 0u64..1000) {
        let s = generate_scene(&SceneSpec::visible_ground(seed)).unwrap();
        let r = process_frame("p", &s.relative, &s.mask, &s.control_points, &s.intrinsics, &PipelineOptions::default())
            .unwrap()
            .report;
        let n = r.persons.len();
        prop_assert_eq!(r.pairs.len(), n * n.saturating_sub(1) / 2);
        for p in &r.pairs {
            prop_assert!(p.id_a < p.id_b);
            prop_assert!(p.distance >= 0.0);
        }
    }
}
