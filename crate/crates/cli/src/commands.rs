//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use socdist::baseline::{baseline_pairs, baseline_positions, fit_from_correspondences, BaselineError, GroundCorrespondence};
use socdist::calibration::{filter_by_confidence, remap_control_points};
use socdist::distancing::{FrameReport, PairDistance, Risk, RiskThresholds};
use socdist::evaluation::{reference_distances, render_table, summarize, DroppedInstance, LabeledPair};
use socdist::geometry::{estimate_pose_pnp_detailed, CameraIntrinsics, GeometryError, PnpOptions, Pose};
use socdist::io::{
    read_bytes, read_control_points, read_inverse_depth, read_json, read_label_mask, read_metric_depth,
    read_points_csv, read_slam_points, report_pairs_from_json, report_to_json, write_bytes, write_json,
    write_points_csv, write_ppm, BoardCorrespondence,
};
use socdist::pipeline::{process_frame, render_overlay, PipelineOptions};
use socdist::synth::{generate_scene, write_bundle, SceneSpec};

use crate::frames::{discover_ids, substitute, ID};
use crate::{
    BaselineArgs, CalibrateArgs, CliError, Context, EvaluateArgs, FrameSelection, InitArgs, Outcome, RunArgs,
    SynthArgs,
};

fn required<T: Clone>(flag: Option<T>, config: &Option<T>, name: &str) -> Result<T, CliError> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (or set it in the config file)")))
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn mkdir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn thresholds(ctx: &Context) -> Result<RiskThresholds, CliError> {
    ctx.config.thresholds().map_err(|e| CliError::Usage(e.to_string()))
}

fn thread_pool(ctx: &Context) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.jobs)
        .build()
        .map_err(data)
}

/// Explicit ids, or the ids found by listing the files of `pattern`.
fn frame_ids(explicit: &[String], pattern: &str) -> Result<Vec<String>, CliError> {
    if !pattern.contains(ID) {
        return Err(CliError::Usage(format!("pattern {pattern:?} lacks {ID}")));
    }
    let ids = if explicit.is_empty() {
        discover_ids(pattern)?
    } else {
        explicit.to_vec()
    };
    if ids.is_empty() {
        return Err(CliError::Data(format!("no files match {pattern:?}")));
    }
    Ok(ids)
}

fn masks_pattern(ctx: &Context, sel: &FrameSelection) -> Result<String, CliError> {
    required(sel.masks.clone(), &ctx.config.masks, "masks")
}

fn pairs_value(pairs: &[PairDistance]) -> Value {
    pairs
        .iter()
        .map(|p| json!({"a": p.id_a, "b": p.id_b, "distance_m": p.distance, "risk": p.risk}))
        .collect()
}

fn risk_counts(pairs: &[PairDistance]) -> String {
    Risk::ALL
        .iter()
        .map(|&r| format!("{} {}", pairs.iter().filter(|p| p.risk == r).count(), r.name()))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn calibrate(ctx: &Context, a: CalibrateArgs) -> Result<Outcome, CliError> {
    let kf: CameraIntrinsics = read_json(&required(a.fixed_intrinsics, &ctx.config.fixed_intrinsics, "fixed-intrinsics")?)?;
    let km: CameraIntrinsics = read_json(&required(a.mobile_intrinsics, &ctx.config.mobile_intrinsics, "mobile-intrinsics")?)?;
    let fixed: Vec<BoardCorrespondence> = read_points_csv(&a.board_fixed)?;
    let mobile: Vec<BoardCorrespondence> = read_points_csv(&a.board_mobile)?;
    if fixed.len() < 4 || mobile.len() < 4 {
        return Err(CliError::Usage(format!(
            "need at least 4 board corners per camera, got {} fixed and {} mobile",
            fixed.len(),
            mobile.len()
        )));
    }
    if fixed.len() != mobile.len() {
        return Err(CliError::Usage(format!(
            "board files list {} and {} corners",
            fixed.len(),
            mobile.len()
        )));
    }
    if let Some(i) = fixed.iter().zip(&mobile).position(|(f, m)| f.world != m.world) {
        return Err(CliError::Data(format!("board corner {} differs between the two files", i + 1)));
    }
    let solve = |rows: &[BoardCorrespondence], k: &CameraIntrinsics| -> Result<_, GeometryError> {
        let world: Vec<_> = rows.iter().map(|r| r.world).collect();
        let pixels: Vec<_> = rows.iter().map(|r| r.pixel).collect();
        estimate_pose_pnp_detailed(&world, &pixels, k, &PnpOptions::default())
    };
    let sf = solve(&fixed, &kf).map_err(|e| CliError::Data(format!("fixed camera: {e}")))?;
    let sm = solve(&mobile, &km).map_err(|e| CliError::Data(format!("mobile camera: {e}")))?;
    let mobile_to_fixed = sf.pose.compose(&sm.pose.inverse());
    write_json(&a.out, &mobile_to_fixed)?;
    Ok(Outcome {
        message: format!(
            "fixed camera RMS reprojection error: {:.3e} px\nmobile camera RMS reprojection error: {:.3e} px\nwrote {}\n",
            sf.final_rms,
            sm.final_rms,
            a.out.display()
        ),
        json: json!({
            "fixed_rms_px": sf.final_rms,
            "mobile_rms_px": sm.final_rms,
            "mobile_to_fixed": mobile_to_fixed,
            "out": a.out,
        }),
        failure: None,
    })
}

pub fn init(ctx: &Context, a: InitArgs) -> Result<Outcome, CliError> {
    let kf: CameraIntrinsics = read_json(&required(a.fixed_intrinsics, &ctx.config.fixed_intrinsics, "fixed-intrinsics")?)?;
    let km: CameraIntrinsics = read_json(&required(a.mobile_intrinsics, &ctx.config.mobile_intrinsics, "mobile-intrinsics")?)?;
    let pose: Pose = read_json(&required(a.pose, &ctx.config.pose, "pose")?)?;
    let threshold = a.confidence_threshold.unwrap_or(ctx.config.confidence_threshold);
    let raw = read_slam_points(&a.slam)?;
    let confident = filter_by_confidence(&raw, threshold).map_err(|e| CliError::Usage(e.to_string()))?;
    let points = remap_control_points(&confident, &km, &kf, &pose).map_err(data)?;
    write_points_csv(&a.out, &points)?;
    Ok(Outcome {
        message: format!(
            "{} of {} SLAM points passed confidence {threshold}; {} control points written to {}\n",
            confident.len(),
            raw.len(),
            points.len(),
            a.out.display()
        ),
        json: json!({
            "slam_points": raw.len(),
            "confident": confident.len(),
            "control_points": points.len(),
            "out": a.out,
        }),
        failure: None,
    })
}

enum FrameResult {
    Done { report: FrameReport, skipped: usize },
    Failed(String),
}

pub fn run(ctx: &Context, a: RunArgs) -> Result<Outcome, CliError> {
    let frames = required(a.frames, &ctx.config.frames, "frames")?;
    let masks = masks_pattern(ctx, &a.selection)?;
    let k: CameraIntrinsics = read_json(&required(a.intrinsics, &ctx.config.fixed_intrinsics, "intrinsics")?)?;
    let control_points = read_control_points(&required(a.control_points, &ctx.config.control_points, "control-points")?)?;
    let trim = a.trim.unwrap_or(ctx.config.trim_fraction);
    if !(0.0..1.0).contains(&trim) {
        return Err(CliError::Usage(format!("--trim {trim} outside [0, 1)")));
    }
    let min_pixels = a.min_pixels.unwrap_or(ctx.config.min_pixels);
    if min_pixels == 0 {
        return Err(CliError::Usage("--min-pixels must be positive".into()));
    }
    let opts = PipelineOptions {
        thresholds: thresholds(ctx)?,
        min_pixels,
        trim_fraction: trim,
    };
    if !masks.contains(ID) {
        return Err(CliError::Usage(format!("pattern {masks:?} lacks {ID}")));
    }
    let ids = frame_ids(&a.selection.ids, &frames)?;
    if let Some(o) = &a.overlay {
        if ids.len() > 1 && !o.contains(ID) {
            return Err(CliError::Usage(format!("--overlay needs {ID} when running {} frames", ids.len())));
        }
    }
    mkdir(&a.out_dir)?;

    let one = |id: &String| -> Result<FrameResult, CliError> {
        let relative = read_inverse_depth(&substitute(&frames, id))?;
        let mask = read_label_mask(&substitute(&masks, id))?;
        let out = match process_frame(id, &relative, &mask, &control_points, &k, &opts) {
            Ok(o) => o,
            Err(e) => return Ok(FrameResult::Failed(e.to_string())),
        };
        write_bytes(
            &a.out_dir.join(format!("{id}.json")),
            format!("{}\n", report_to_json(&out.report)?).as_bytes(),
        )?;
        if let Some(o) = &a.overlay {
            write_ppm(&substitute(o, id), &render_overlay(&relative, &mask, &out.report))?;
        }
        Ok(FrameResult::Done {
            report: out.report,
            skipped: out.skipped.len(),
        })
    };
    let results: Vec<Result<FrameResult, CliError>> = thread_pool(ctx)?.install(|| ids.par_iter().map(one).collect());

    let mut message = String::new();
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        let r = r.unwrap_or_else(|e| FrameResult::Failed(e.message().to_owned()));
        match r {
            FrameResult::Done { report, skipped } => {
                writeln!(
                    message,
                    "{id}: {} persons ({skipped} skipped), {} pairs: {}; {} control points",
                    report.persons.len(),
                    report.pairs.len(),
                    risk_counts(&report.pairs),
                    report.control_points_used
                )
                .unwrap();
                let v: Value = serde_json::from_str(&report_to_json(&report)?).map_err(data)?;
                reports.push(v);
            }
            FrameResult::Failed(m) => {
                writeln!(message, "{id}: failed: {m}").unwrap();
                errors.push(json!({"frame_id": id, "message": m}));
            }
        }
    }
    let failure = (!errors.is_empty()).then(|| format!("{} of {} frames failed", errors.len(), ids.len()));
    Ok(Outcome {
        message,
        json: json!({"reports": reports, "errors": errors}),
        failure,
    })
}

pub fn baseline(ctx: &Context, a: BaselineArgs) -> Result<Outcome, CliError> {
    let masks = masks_pattern(ctx, &a.selection)?;
    let t = thresholds(ctx)?;
    let min_pixels = a.min_pixels.unwrap_or(ctx.config.min_pixels);
    let ground: Vec<GroundCorrespondence> = read_points_csv(&a.ground)?;
    let h = match fit_from_correspondences(&ground) {
        Ok(h) => h,
        Err(e @ BaselineError::GroundNotVisible(_)) => {
            return Err(CliError::Data(format!("baseline not applicable: {e}")))
        }
        Err(e) => return Err(data(e)),
    };
    let ids = frame_ids(&a.selection.ids, &masks)?;
    mkdir(&a.out_dir)?;
    let one = |id: &String| -> Result<Value, CliError> {
        let mask = read_label_mask(&substitute(&masks, id))?;
        let positions = baseline_positions(&mask, &h, min_pixels).map_err(|e| CliError::Data(format!("{id}: {e}")))?;
        let pairs = baseline_pairs(&positions, &t);
        let persons: Vec<Value> = positions
            .iter()
            .map(|p| {
                json!({
                    "id": p.instance_id,
                    "foot": [p.foot.u, p.foot.v],
                    "ground": [p.ground.x, p.ground.y],
                })
            })
            .collect();
        let doc = json!({
            "frame_id": id,
            "method": "ground_homography",
            "persons": persons,
            "pairs": pairs_value(&pairs),
        });
        write_json(&a.out_dir.join(format!("{id}.json")), &doc)?;
        Ok(doc)
    };
    let results: Vec<Result<Value, CliError>> = thread_pool(ctx)?.install(|| ids.par_iter().map(one).collect());
    let mut message = String::new();
    let mut docs = Vec::new();
    let mut errors = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(doc) => {
                let n = doc["pairs"].as_array().map_or(0, Vec::len);
                writeln!(message, "{id}: {} persons, {n} pairs", doc["persons"].as_array().map_or(0, Vec::len)).unwrap();
                docs.push(doc);
            }
            Err(e) => {
                writeln!(message, "{id}: failed: {}", e.message().to_owned()).unwrap();
                errors.push(json!({"frame_id": id, "message": e.message().to_owned()}));
            }
        }
    }
    let failure = (!errors.is_empty()).then(|| format!("{} of {} frames failed", errors.len(), ids.len()));
    Ok(Outcome {
        message,
        json: json!({"reports": docs, "errors": errors}),
        failure,
    })
}

fn report_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(data)?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "json") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no report files in {}", dir.display())));
    }
    Ok(files)
}

/// Predicted pairs, reference pairs and instances dropped from the reference.
type FrameEvaluation = (Vec<LabeledPair>, Vec<LabeledPair>, Vec<DroppedInstance>);

pub fn evaluate(ctx: &Context, a: EvaluateArgs) -> Result<Outcome, CliError> {
    let masks = required(a.masks, &ctx.config.masks, "masks")?;
    for pat in [&masks, &a.reference] {
        if !pat.contains(ID) {
            return Err(CliError::Usage(format!("pattern {pat:?} lacks {ID}")));
        }
    }
    if !(a.max_ref_distance.is_finite() && a.max_ref_distance > 0.0) {
        return Err(CliError::Usage(format!("--max-ref-distance {} must be positive", a.max_ref_distance)));
    }
    let k: CameraIntrinsics = read_json(&required(a.intrinsics, &ctx.config.fixed_intrinsics, "intrinsics")?)?;
    let t = thresholds(ctx)?;
    let min_pixels = a.min_pixels.unwrap_or(ctx.config.min_pixels);
    let files = report_files(&a.reports)?;

    let one = |path: &PathBuf| -> Result<FrameEvaluation, CliError> {
        let text = read_bytes(path)?;
        let text = std::str::from_utf8(&text).map_err(|_| CliError::Data(format!("{} is not UTF-8", path.display())))?;
        let (id, pairs) = report_pairs_from_json(text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mask = read_label_mask(&substitute(&masks, &id))?;
        let reference = read_metric_depth(&substitute(&a.reference, &id))?;
        let r = reference_distances(&mask, &reference, &k, &t, min_pixels).map_err(|e| CliError::Data(format!("{id}: {e}")))?;
        let dropped = r
            .dropped
            .iter()
            .map(|&i| DroppedInstance { frame_id: id.clone(), id: i })
            .collect();
        Ok((LabeledPair::tag(&id, &pairs), LabeledPair::tag(&id, &r.pairs), dropped))
    };
    let per_file: Vec<_> = thread_pool(ctx)?.install(|| files.par_iter().map(one).collect());
    let mut predicted = Vec::new();
    let mut reference = Vec::new();
    let mut dropped = Vec::new();
    for r in per_file {
        let (p, r, d) = r?;
        predicted.extend(p);
        reference.extend(r);
        dropped.extend(d);
    }
    let summary = summarize(&predicted, &reference, &t, a.max_ref_distance, dropped).map_err(data)?;
    if let Some(out) = &a.out {
        write_json(out, &summary)?;
    }
    let json = serde_json::to_value(&summary).map_err(data)?;
    Ok(Outcome {
        message: render_table(&summary),
        json,
        failure: None,
    })
}

pub fn synth(_ctx: &Context, a: SynthArgs) -> Result<Outcome, CliError> {
    let mut spec = if a.hidden_ground {
        SceneSpec::hidden_ground(a.seed)
    } else {
        SceneSpec::visible_ground(a.seed)
    };
    if let Some(n) = a.people {
        spec.people = n;
    }
    if a.frame_id.is_empty() || a.frame_id.contains(['/', '\\']) {
        return Err(CliError::Usage(format!("invalid frame id {:?}", a.frame_id)));
    }
    let scene = generate_scene(&spec).map_err(data)?;
    let paths = write_bundle(&a.out, &scene, &a.frame_id)?;
    Ok(Outcome {
        message: format!(
            "wrote bundle for frame {} ({} persons, {} pairs, ground {}) to {}\n",
            a.frame_id,
            scene.truth.persons.len(),
            scene.truth.pairs.len(),
            if scene.truth.ground_visible { "visible" } else { "hidden" },
            paths.root.display()
        ),
        json: json!({
            "frame_id": a.frame_id,
            "out": paths.root,
            "persons": scene.truth.persons.len(),
            "pairs": scene.truth.pairs.len(),
            "ground_visible": scene.truth.ground_visible,
        }),
        failure: None,
    })
}
