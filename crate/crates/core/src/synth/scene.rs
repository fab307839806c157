//! Seeded scene generation and the affine inverse-depth corruption.

use nalgebra::{Point2, Vector3};

use super::render::{render, Aabb, CameraRig, Render, Surface, World};
use super::rng::SplitMix64;
use super::SynthError;
use crate::baseline::{BoundingBox, GroundCorrespondence};
use crate::calibration::{remap_point, ControlPoint, RawSlamPoint};
use crate::distancing::{PairDistance, RiskThresholds};
use crate::geometry::{back_project, project_point, transform_point, CameraIntrinsics, Pixel, Point3, Pose};
use crate::io::BoardCorrespondence;
use crate::maps::{GridPixel, InstanceMask, InverseDepthMap, MetricDepthMap};
use crate::people::PersonMeasurement;
use crate::scaling::ScaleParams;

const SCENE_ATTEMPTS: usize = 200;
const PLACEMENT_ATTEMPTS: usize = 1000;
/// Minimum pixel gap between the image footprints of two people.
const PERSON_GAP_PX: f64 = 2.0;
const BOARD_ROWS: usize = 4;
const BOARD_COLS: usize = 5;
const BOARD_SPACING: f64 = 0.12;

/// Floor region (world `x`, `y`) where people are placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementVolume {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

/// Ranges for the box dimensions of a person, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonSize {
    pub half_width: (f64, f64),
    pub half_depth: (f64, f64),
    pub height: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub intrinsics: CameraIntrinsics,
    pub camera_height: f64,
    /// Downward pitch of the fixed camera, radians.
    pub camera_pitch: f64,
    /// Distance of the back wall along world `y`.
    pub wall_distance: f64,
    pub people: usize,
    pub placement: PlacementVolume,
    pub person_size: PersonSize,
    /// When set, these boxes are used as people instead of random placement.
    pub explicit_people: Option<Vec<Aabb>>,
    /// Random boxes placed between the people and the back wall.
    pub background_boxes: usize,
    /// Fixed background boxes, allowed in front of people.
    pub occluders: Vec<Aabb>,
    pub control_points: usize,
    pub ground_points: usize,
    /// Low-confidence SLAM samples with arbitrary depth.
    pub slam_distractors: usize,
    /// Range of the hidden corruption slope, must be positive.
    pub corruption_a: (f64, f64),
    pub corruption_b: (f64, f64),
    /// Random people with fewer visible pixels are re-drawn.
    pub min_person_pixels: usize,
}

impl SceneSpec {
    /// Indoor-sized 320x240 scene with the floor in view.
    pub fn visible_ground(seed: u64) -> Self {
        Self {
            seed,
            intrinsics: CameraIntrinsics::new(300.0, 300.0, 160.0, 120.0, 320, 240).expect("valid"),
            camera_height: 2.5,
            camera_pitch: 0.35,
            wall_distance: 11.0,
            people: 4,
            placement: PlacementVolume {
                x: (-2.5, 2.5),
                y: (3.5, 8.0),
            },
            person_size: PersonSize {
                half_width: (0.2, 0.3),
                half_depth: (0.1, 0.2),
                height: (1.5, 1.9),
            },
            explicit_people: None,
            background_boxes: 3,
            occluders: Vec::new(),
            control_points: 40,
            ground_points: 12,
            slam_distractors: 20,
            corruption_a: (0.2, 5.0),
            corruption_b: (-0.05, 0.5),
            min_person_pixels: 200,
        }
    }

    /// A wide counter in front of the people hides every floor pixel.
    pub fn hidden_ground(seed: u64) -> Self {
        Self {
            camera_pitch: 0.2,
            wall_distance: 5.3,
            people: 3,
            placement: PlacementVolume {
                x: (-1.5, 1.5),
                y: (3.4, 4.8),
            },
            background_boxes: 0,
            occluders: vec![Aabb::new(Vector3::new(-50.0, 2.2, 0.0), Vector3::new(50.0, 3.0, 1.1))],
            ..Self::visible_ground(seed)
        }
    }

    /// Two thin people facing a level camera, 2 m apart at 5 m depth.
    pub fn two_people_two_meters(seed: u64) -> Self {
        Self {
            intrinsics: CameraIntrinsics::new(1000.0, 1000.0, 500.0, 300.0, 1000, 600).expect("valid"),
            camera_height: 1.5,
            camera_pitch: 0.0,
            wall_distance: 10.0,
            people: 2,
            explicit_people: Some(vec![
                Aabb::new(Vector3::new(-1.25, 5.0, 0.0), Vector3::new(-0.75, 5.0, 1.8)),
                Aabb::new(Vector3::new(0.75, 5.0, 0.0), Vector3::new(1.25, 5.0, 1.8)),
            ]),
            background_boxes: 0,
            ..Self::visible_ground(seed)
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        let ordered = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !(self.corruption_a.0 > 0.0 && ordered(self.corruption_a)) {
            return bad("corruption slope range must be positive and ordered");
        }
        if !ordered(self.corruption_b) {
            return bad("corruption offset range must be ordered");
        }
        if !(self.camera_height > 0.0 && self.camera_height.is_finite()) {
            return bad("camera height must be positive");
        }
        if !(self.camera_pitch.abs() < 1.5) {
            return bad("camera pitch must be within (-1.5, 1.5) rad");
        }
        if !(self.wall_distance > 0.0 && self.wall_distance <= 1e3) {
            return bad("wall distance must be in (0, 1000] m");
        }
        let sz = &self.person_size;
        if ![self.placement.x, self.placement.y, sz.half_width, sz.half_depth, sz.height]
            .into_iter()
            .all(ordered)
            || sz.half_width.0 <= 0.0
            || sz.half_depth.0 < 0.0
            || sz.height.0 <= 0.0
        {
            return bad("placement and person size ranges must be ordered and positive");
        }
        let n = self.explicit_people.as_ref().map_or(self.people, Vec::len);
        if n > 255 {
            return bad("at most 255 people");
        }
        if self.control_points < 2 {
            return bad("at least two control points are needed");
        }
        Ok(())
    }
}

/// Hidden quantities used to build the bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenParams {
    pub a: f64,
    pub b: f64,
    /// The line that maps the relative map back to metric inverse depth.
    pub scale: ScaleParams,
    pub mobile_to_fixed: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Surface point under each person's mask centroid, fixed-camera frame.
    pub persons: Vec<PersonMeasurement>,
    pub pairs: Vec<PairDistance>,
    /// Floor distances between the rays through the bounding-box foot
    /// pixels; empty when the floor is not visible.
    pub ground_pairs: Vec<PairDistance>,
    pub ground_visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub intrinsics: CameraIntrinsics,
    pub rig: CameraRig,
    pub world: World,
    pub metric: MetricDepthMap,
    pub relative: InverseDepthMap,
    pub mask: InstanceMask,
    pub control_points: Vec<ControlPoint>,
    pub ground: Vec<GroundCorrespondence>,
    pub mobile_intrinsics: CameraIntrinsics,
    pub slam_points: Vec<RawSlamPoint>,
    pub board_fixed: Vec<BoardCorrespondence>,
    pub board_mobile: Vec<BoardCorrespondence>,
    pub hidden: HiddenParams,
    pub truth: GroundTruth,
}

/// `x = a / d + b` at every valid pixel and `x = b` elsewhere.
pub fn corrupt_to_relative(metric: &MetricDepthMap, a: f64, b: f64) -> Result<InverseDepthMap, SynthError> {
    if !(a > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(SynthError::InvalidCorruption { a, b });
    }
    let w = metric.width() as usize;
    let mut values = Vec::with_capacity(metric.values().len());
    for (i, &d) in metric.values().iter().enumerate() {
        if d == MetricDepthMap::INVALID {
            values.push(b);
            continue;
        }
        let x = a / d + b;
        if !(x > 0.0 && x.is_finite()) {
            return Err(SynthError::NonPositiveRelative {
                u: (i % w) as u32,
                v: (i / w) as u32,
                x,
            });
        }
        values.push(x);
    }
    Ok(InverseDepthMap::new(metric.width(), metric.height(), values).expect("finite values of matching size"))
}

pub fn generate_scene(spec: &SceneSpec) -> Result<SceneBundle, SynthError> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let k = spec.intrinsics;
    let rig = CameraRig {
        k,
        height: spec.camera_height,
        pitch: spec.camera_pitch,
    };

    let mut scene = None;
    for _ in 0..SCENE_ATTEMPTS {
        let people = match &spec.explicit_people {
            Some(p) => p.clone(),
            None => match place_people(spec, &rig, &mut rng) {
                Some(p) => p,
                None => continue,
            },
        };
        let mut boxes = spec.occluders.clone();
        boxes.extend(background_boxes(spec, &people, &mut rng));
        let world = World {
            wall: spec.wall_distance,
            boxes,
            people,
        };
        let r = render(&rig, &world);
        let min_px = if spec.explicit_people.is_some() { 1 } else { spec.min_person_pixels.max(1) };
        match person_centroids(&r, &rig, world.people.len(), min_px) {
            Some(c) => {
                scene = Some((world, r, c));
                break;
            }
            None if spec.explicit_people.is_some() => {
                return Err(SynthError::InfeasibleSpec(
                    "an explicit person is not visible or has an ambiguous centroid".into(),
                ))
            }
            None => continue,
        }
    }
    let (world, r, centroids) =
        scene.ok_or_else(|| SynthError::InfeasibleSpec("people cannot be placed without overlap".into()))?;

    let (w, h) = (k.width(), k.height());
    let metric = MetricDepthMap::new(w, h, r.depth.clone()).expect("rendered raster");
    let labels: Vec<u32> = r
        .surface
        .iter()
        .map(|s| match s {
            Some(Surface::Person(id)) => *id,
            _ => 0,
        })
        .collect();
    let mask = InstanceMask::new(w, h, labels).expect("rendered raster");

    let d_max = metric.values().iter().copied().fold(0.0, f64::max);
    let (a, b) = sample_corruption(spec, d_max, &mut rng)?;
    let relative = corrupt_to_relative(&metric, a, b)?;

    let mobile_intrinsics = CameraIntrinsics::new(
        0.9 * k.fx(),
        0.9 * k.fy(),
        k.cx(),
        k.cy(),
        k.width(),
        k.height(),
    )
    .expect("scaled intrinsics stay valid");
    let mobile_to_fixed = Pose::from_axis_angle(
        Vector3::new(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)),
        Vector3::new(rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1), rng.uniform(-0.2, 0.2)),
    );

    let (control_points, mut slam_points) =
        sample_control_points(spec, &r, &metric, &mobile_intrinsics, &mobile_to_fixed, &mut rng)?;
    for _ in 0..spec.slam_distractors {
        let px = Pixel::new(
            rng.uniform(0.0, mobile_intrinsics.width() as f64 - 1.0),
            rng.uniform(0.0, mobile_intrinsics.height() as f64 - 1.0),
        );
        let p = RawSlamPoint::new(px, rng.uniform(0.5, 20.0), rng.uniform(0.0, 0.95)).expect("valid sample");
        slam_points.push(p);
    }
    for i in (1..slam_points.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        slam_points.swap(i, j);
    }

    let ground = sample_ground(spec, &r, &rig, &mut rng);
    let (board_fixed, board_mobile) = sample_board(&k, &mobile_intrinsics, &mobile_to_fixed, &mut rng)?;

    let t = RiskThresholds::default();
    let persons: Vec<PersonMeasurement> = centroids
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let d = metric.depth(*c).expect("person pixels have depth");
            PersonMeasurement {
                instance_id: i as u32 + 1,
                centroid: *c,
                position: back_project(&k, c.to_pixel(), d).expect("positive depth"),
            }
        })
        .collect();
    let pairs = all_pairs(&persons.iter().map(|p| (p.instance_id, p.position.coords)).collect::<Vec<_>>(), &t);

    let ground_visible = !ground.is_empty();
    let ground_pairs = if ground_visible {
        let feet = foot_points(&mask, &rig)?;
        all_pairs(&feet, &t)
    } else {
        Vec::new()
    };

    Ok(SceneBundle {
        intrinsics: k,
        rig,
        world,
        metric,
        relative,
        mask,
        control_points,
        ground,
        mobile_intrinsics,
        slam_points,
        board_fixed,
        board_mobile,
        hidden: HiddenParams {
            a,
            b,
            scale: ScaleParams::new(-b / a, 1.0 / a).expect("finite"),
            mobile_to_fixed,
        },
        truth: GroundTruth {
            persons,
            pairs,
            ground_pairs,
            ground_visible,
        },
    })
}

fn all_pairs<const D: usize>(
    pts: &[(u32, nalgebra::SVector<f64, D>)],
    t: &RiskThresholds,
) -> Vec<PairDistance> {
    let mut out = Vec::new();
    for (i, (ia, pa)) in pts.iter().enumerate() {
        for (ib, pb) in &pts[i + 1..] {
            out.push(PairDistance::new(*ia, *ib, (pa - pb).norm(), t));
        }
    }
    out.sort_by_key(|p| (p.id_a, p.id_b));
    out
}

/// Image-space bounds of a box seen by the camera, or `None` when part of
/// it is behind the camera.
fn image_bounds(rig: &CameraRig, b: &Aabb) -> Option<[f64; 4]> {
    let mut r = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for c in b.corners() {
        let px = project_point(&rig.k, &rig.to_camera(&c)).ok()?;
        r[0] = r[0].min(px.u);
        r[1] = r[1].min(px.v);
        r[2] = r[2].max(px.u);
        r[3] = r[3].max(px.v);
    }
    Some(r)
}

fn place_people(spec: &SceneSpec, rig: &CameraRig, rng: &mut SplitMix64) -> Option<Vec<Aabb>> {
    let (w, h) = (rig.k.width() as f64, rig.k.height() as f64);
    let sz = &spec.person_size;
    let mut people: Vec<Aabb> = Vec::with_capacity(spec.people);
    let mut rects: Vec<[f64; 4]> = Vec::with_capacity(spec.people);
    for _ in 0..spec.people {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let b = Aabb::on_floor(
                rng.uniform(spec.placement.x.0, spec.placement.x.1),
                rng.uniform(spec.placement.y.0, spec.placement.y.1),
                rng.uniform(sz.half_width.0, sz.half_width.1),
                rng.uniform(sz.half_depth.0, sz.half_depth.1),
                rng.uniform(sz.height.0, sz.height.1),
            );
            let Some(r) = image_bounds(rig, &b) else { continue };
            // whole box in frame with a margin, feet above the bottom row
            if r[0] < 1.0 || r[1] < 1.0 || r[2] > w - 3.0 || r[3] > h - 3.0 {
                continue;
            }
            let overlaps = rects.iter().any(|o| {
                r[0] <= o[2] + PERSON_GAP_PX
                    && o[0] <= r[2] + PERSON_GAP_PX
                    && r[1] <= o[3] + PERSON_GAP_PX
                    && o[1] <= r[3] + PERSON_GAP_PX
            });
            if overlaps {
                continue;
            }
            people.push(b);
            rects.push(r);
            placed = true;
            break;
        }
        if !placed {
            return None;
        }
    }
    Some(people)
}

fn background_boxes(spec: &SceneSpec, people: &[Aabb], rng: &mut SplitMix64) -> Vec<Aabb> {
    let behind = people.iter().map(|p| p.max.y).fold(0.0, f64::max) + 0.3;
    let mut out = Vec::new();
    for _ in 0..spec.background_boxes {
        let half_d = rng.uniform(0.15, 0.5);
        let lo = behind + half_d;
        let hi = spec.wall_distance - half_d - 0.05;
        let half_w = rng.uniform(0.2, 0.8);
        let x = rng.uniform(spec.placement.x.0 - 1.0, spec.placement.x.1 + 1.0);
        let height = rng.uniform(0.3, 2.0);
        if lo >= hi {
            continue;
        }
        let y = rng.uniform(lo, hi);
        out.push(Aabb::on_floor(x, y, half_w, half_d, height));
    }
    out
}

fn round_half_down(x: f64) -> i64 {
    (x - 0.5).ceil() as i64
}

/// Rounded mean pixel of each person, if every person has at least
/// `min_px` pixels and its rounded mean lies on the person.
fn person_centroids(r: &Render, rig: &CameraRig, n: usize, min_px: usize) -> Option<Vec<GridPixel>> {
    let w = rig.k.width() as usize;
    let mut sums = vec![(0u64, 0u64, 0usize); n];
    for (i, s) in r.surface.iter().enumerate() {
        if let Some(Surface::Person(id)) = s {
            let e = &mut sums[*id as usize - 1];
            e.0 += (i % w) as u64;
            e.1 += (i / w) as u64;
            e.2 += 1;
        }
    }
    let mut out = Vec::with_capacity(n);
    for (id, &(su, sv, c)) in sums.iter().enumerate() {
        if c < min_px {
            return None;
        }
        let u = round_half_down(su as f64 / c as f64);
        let v = round_half_down(sv as f64 / c as f64);
        let idx = v as usize * w + u as usize;
        if r.surface[idx] != Some(Surface::Person(id as u32 + 1)) {
            return None;
        }
        out.push(GridPixel::new(u as u32, v as u32));
    }
    Some(out)
}

fn sample_corruption(spec: &SceneSpec, d_max: f64, rng: &mut SplitMix64) -> Result<(f64, f64), SynthError> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let a = rng.uniform(spec.corruption_a.0, spec.corruption_a.1);
        let b = rng.uniform(spec.corruption_b.0, spec.corruption_b.1);
        if d_max == 0.0 || a / d_max + b >= 0.01 * a / d_max {
            return Ok((a, b));
        }
    }
    Err(SynthError::InfeasibleSpec(
        "corruption range leaves non-positive relative values".into(),
    ))
}

type ControlSample = (Vec<ControlPoint>, Vec<RawSlamPoint>);

/// Background pixels with valid depth that the mobile camera also sees.
fn sample_control_points(
    spec: &SceneSpec,
    r: &Render,
    metric: &MetricDepthMap,
    k_mobile: &CameraIntrinsics,
    mobile_to_fixed: &Pose,
    rng: &mut SplitMix64,
) -> Result<ControlSample, SynthError> {
    let (w, h) = (metric.width() as u64, metric.height() as u64);
    let fixed_to_mobile = mobile_to_fixed.inverse();
    let mut chosen = std::collections::HashSet::new();
    let mut cps = Vec::with_capacity(spec.control_points);
    let mut slam = Vec::with_capacity(spec.control_points);
    let k_fixed = &spec.intrinsics;
    for _ in 0..spec.control_points * 200 {
        if cps.len() == spec.control_points {
            break;
        }
        let px = GridPixel::new(rng.below(w) as u32, rng.below(h) as u32);
        let idx = px.v as usize * w as usize + px.u as usize;
        if matches!(r.surface[idx], None | Some(Surface::Person(_))) || chosen.contains(&px) {
            continue;
        }
        let Some(d) = metric.depth(px) else { continue };
        let p_fixed = back_project(k_fixed, px.to_pixel(), d).expect("positive depth");
        let p_mobile = transform_point(&fixed_to_mobile, &p_fixed);
        let Ok(px_m) = project_point(k_mobile, &p_mobile) else { continue };
        if !(px_m.u >= 0.0 && px_m.v >= 0.0 && px_m.u <= k_mobile.width() as f64 - 1.0 && px_m.v <= k_mobile.height() as f64 - 1.0) {
            continue;
        }
        let sp = RawSlamPoint::new(px_m, p_mobile.z, 1.0).expect("valid sample");
        // keep only samples that remap onto the same fixed pixel
        match remap_point(&sp, k_mobile, k_fixed, mobile_to_fixed) {
            Some((back, _)) if back.round_half_down() == (px.u as i64, px.v as i64) => {}
            _ => continue,
        }
        chosen.insert(px);
        cps.push(ControlPoint::new(px, d).expect("positive depth"));
        slam.push(sp);
    }
    if cps.len() < spec.control_points {
        return Err(SynthError::InfeasibleSpec(format!(
            "only {} of {} control points could be placed on the background",
            cps.len(),
            spec.control_points
        )));
    }
    Ok((cps, slam))
}

fn sample_ground(spec: &SceneSpec, r: &Render, rig: &CameraRig, rng: &mut SplitMix64) -> Vec<GroundCorrespondence> {
    let floor: Vec<usize> = r
        .surface
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == Some(Surface::Floor))
        .map(|(i, _)| i)
        .collect();
    let w = rig.k.width() as usize;
    let mut picked = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    if floor.is_empty() {
        return out;
    }
    let want = spec.ground_points.min(floor.len());
    while out.len() < want {
        let i = floor[rng.below(floor.len() as u64) as usize];
        if !picked.insert(i) {
            continue;
        }
        let (u, v) = ((i % w) as f64, (i / w) as f64);
        let d = rig.ray(u, v);
        let p = rig.origin() + d * r.depth[i];
        out.push(GroundCorrespondence {
            pixel: Pixel::new(u, v),
            ground: [p.x, p.y],
        });
    }
    out
}

/// Floor point under each person's bounding-box foot pixel.
fn foot_points(mask: &InstanceMask, rig: &CameraRig) -> Result<Vec<(u32, nalgebra::Vector2<f64>)>, SynthError> {
    let mut out = Vec::new();
    for (id, pixels) in mask.instances() {
        let bbox = BoundingBox::of(&pixels).expect("instances are non-empty");
        let foot = bbox.foot();
        let d = rig.ray(foot.u, foot.v);
        if !(d.z < 0.0) {
            return Err(SynthError::InfeasibleSpec(format!("foot ray of person {id} misses the floor")));
        }
        let p = rig.origin() + d * (-rig.height / d.z);
        out.push((id, Point2::new(p.x, p.y).coords));
    }
    Ok(out)
}

type BoardSample = (Vec<BoardCorrespondence>, Vec<BoardCorrespondence>);

/// A planar grid seen by both cameras, board-frame `z = 0`.
fn sample_board(
    k_fixed: &CameraIntrinsics,
    k_mobile: &CameraIntrinsics,
    mobile_to_fixed: &Pose,
    rng: &mut SplitMix64,
) -> Result<BoardSample, SynthError> {
    let fixed_to_mobile = mobile_to_fixed.inverse();
    let grid: Vec<Point3> = (0..BOARD_ROWS)
        .flat_map(|i| (0..BOARD_COLS).map(move |j| Point3::new(j as f64 * BOARD_SPACING, i as f64 * BOARD_SPACING, 0.0)))
        .collect();
    let center = Vector3::new(
        (BOARD_COLS - 1) as f64 * BOARD_SPACING / 2.0,
        (BOARD_ROWS - 1) as f64 * BOARD_SPACING / 2.0,
        0.0,
    );
    let inside = |k: &CameraIntrinsics, p: &Point3| -> Option<Pixel> {
        let px = project_point(k, p).ok()?;
        (px.u >= 0.0 && px.v >= 0.0 && px.u <= k.width() as f64 - 1.0 && px.v <= k.height() as f64 - 1.0)
            .then_some(px)
    };
    for _ in 0..PLACEMENT_ATTEMPTS {
        let rot = Pose::from_axis_angle(
            Vector3::new(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3)),
            Vector3::zeros(),
        );
        let target = Vector3::new(rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2), rng.uniform(1.5, 3.0));
        let t = target - rot.rotation() * center;
        let board_to_fixed = Pose::new(*rot.rotation(), t).expect("rotation from axis-angle");
        let mut fixed = Vec::with_capacity(grid.len());
        let mut mobile = Vec::with_capacity(grid.len());
        for g in &grid {
            let pf = transform_point(&board_to_fixed, g);
            let pm = transform_point(&fixed_to_mobile, &pf);
            match (inside(k_fixed, &pf), inside(k_mobile, &pm)) {
                (Some(a), Some(b)) => {
                    fixed.push(BoardCorrespondence { world: *g, pixel: a });
                    mobile.push(BoardCorrespondence { world: *g, pixel: b });
                }
                _ => break,
            }
        }
        if fixed.len() == grid.len() {
            return Ok((fixed, mobile));
        }
    }
    Err(SynthError::InfeasibleSpec("calibration board does not fit both views".into()))
}
