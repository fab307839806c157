//! Ray casting against a floor plane, a back wall and axis-aligned boxes.
//!
//! World frame: `x` right, `y` forward, `z` up, floor at `z = 0`, back wall
//! at `y = wall`. The camera sits at `(0, 0, height)` pitched down about `x`.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{CameraIntrinsics, Point3, Pose};

/// Person boxes are padded by this much when deciding pixel membership so
/// that rays through an exact edge count as hits.
pub const EDGE_PAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    /// Upright box standing on the floor, centered on `(x, y)`.
    pub fn on_floor(x: f64, y: f64, half_w: f64, half_d: f64, height: f64) -> Self {
        Self::new(
            Vector3::new(x - half_w, y - half_d, 0.0),
            Vector3::new(x + half_w, y + half_d, height),
        )
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vector3::new(a.x, a.y, a.z),
            Vector3::new(b.x, a.y, a.z),
            Vector3::new(a.x, b.y, a.z),
            Vector3::new(b.x, b.y, a.z),
            Vector3::new(a.x, a.y, b.z),
            Vector3::new(b.x, a.y, b.z),
            Vector3::new(a.x, b.y, b.z),
            Vector3::new(b.x, b.y, b.z),
        ]
    }

    /// Slab test. Returns `(t_enter, t_exit)` of the box grown by `pad`.
    fn slab(&self, o: &Vector3<f64>, d: &Vector3<f64>, pad: f64) -> (f64, f64) {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let (lo, hi) = (self.min[i] - pad, self.max[i] + pad);
            if d[i] == 0.0 {
                if o[i] < lo || o[i] > hi {
                    return (f64::INFINITY, f64::NEG_INFINITY);
                }
                continue;
            }
            let a = (lo - o[i]) / d[i];
            let b = (hi - o[i]) / d[i];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0, t1)
    }

    /// Entry parameter of a ray that starts outside the box.
    pub fn hit(&self, o: &Vector3<f64>, d: &Vector3<f64>, pad: f64) -> Option<f64> {
        let (t0, t1) = self.slab(o, d, pad);
        if t0 <= t1 && t0 > 0.0 {
            // depth of the unpadded surface, so interior pixels are unaffected by the pad
            let (e0, _) = self.slab(o, d, 0.0);
            Some(if e0.is_finite() && e0 > 0.0 { e0 } else { t0 })
        } else {
            None
        }
    }
}

/// Fixed camera placement in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub k: CameraIntrinsics,
    pub height: f64,
    /// Downward pitch, radians.
    pub pitch: f64,
}

impl CameraRig {
    pub fn origin(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.height)
    }

    /// Columns are the camera axes expressed in the world frame.
    pub fn cam_to_world(&self) -> Matrix3<f64> {
        let (s, c) = self.pitch.sin_cos();
        Matrix3::from_columns(&[
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, -s, -c),
            Vector3::new(0.0, c, -s),
        ])
    }

    /// World-to-camera pose.
    pub fn world_to_cam(&self) -> Pose {
        let r = self.cam_to_world().transpose();
        Pose::new(r, -(r * self.origin())).expect("rotation built from orthonormal columns")
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Point3 {
        Point3::from(self.cam_to_world().transpose() * (p - self.origin()))
    }

    /// World-frame direction of the ray through pixel `(u, v)`, scaled so
    /// that its camera-frame z component is 1.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        let dc = Vector3::new((u - self.k.cx()) / self.k.fx(), (v - self.k.cy()) / self.k.fy(), 1.0);
        self.cam_to_world() * dc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Floor,
    Wall,
    Box(usize),
    Person(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub wall: f64,
    pub boxes: Vec<Aabb>,
    /// Labeled 1.. in order.
    pub people: Vec<Aabb>,
}

impl World {
    /// Nearest surface along the ray and its camera-frame depth. People win
    /// ties against the background.
    pub fn cast(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(Surface, f64)> {
        let mut best: Option<(Surface, f64)> = None;
        let take = |s: Surface, t: f64, best: &mut Option<(Surface, f64)>| {
            if best.is_none_or(|(_, bt)| t < bt) {
                *best = Some((s, t));
            }
        };
        if d.z < 0.0 {
            take(Surface::Floor, -o.z / d.z, &mut best);
        }
        if d.y > 0.0 {
            take(Surface::Wall, (self.wall - o.y) / d.y, &mut best);
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if let Some(t) = b.hit(o, d, 0.0) {
                take(Surface::Box(i), t, &mut best);
            }
        }
        let mut person: Option<(Surface, f64)> = None;
        for (i, b) in self.people.iter().enumerate() {
            if let Some(t) = b.hit(o, d, EDGE_PAD) {
                take(Surface::Person(i as u32 + 1), t, &mut person);
            }
        }
        match (person, best) {
            (Some(p), Some(b)) if p.1 <= b.1 + EDGE_PAD => Some(p),
            (Some(p), None) => Some(p),
            (_, b) => b,
        }
    }
}

/// Per-pixel render output, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub depth: Vec<f64>,
    pub surface: Vec<Option<Surface>>,
}

pub fn render(rig: &CameraRig, world: &World) -> Render {
    let (w, h) = (rig.k.width() as usize, rig.k.height() as usize);
    let o = rig.origin();
    let mut depth = vec![0.0; w * h];
    let mut surface = vec![None; w * h];
    for v in 0..h {
        for u in 0..w {
            let d = rig.ray(u as f64, v as f64);
            if let Some((s, t)) = world.cast(&o, &d) {
                depth[v * w + u] = t;
                surface[v * w + u] = Some(s);
            }
        }
    }
    Render { depth, surface }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rig(pitch: f64) -> CameraRig {
        CameraRig {
            k: CameraIntrinsics::new(100.0, 100.0, 50.0, 40.0, 100, 80).unwrap(),
            height: 2.0,
            pitch,
        }
    }

    #[test]
    fn camera_axes_are_a_rotation() {
        let r = rig(0.3).cam_to_world();
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-15);
        assert!((r.determinant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn optical_axis_hits_floor_at_expected_depth() {
        let rg = rig(0.5);
        let world = World { wall: 100.0, boxes: vec![], people: vec![] };
        let (s, t) = world.cast(&rg.origin(), &rg.ray(50.0, 40.0)).unwrap();
        assert_eq!(s, Surface::Floor);
        assert!((t - 2.0 / 0.5f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn depth_is_camera_z() {
        let rg = rig(0.2);
        let world = World { wall: 6.0, boxes: vec![], people: vec![] };
        let o = rg.origin();
        for &(u, v) in &[(10.0, 5.0), (90.0, 70.0), (50.0, 40.0)] {
            let d = rg.ray(u, v);
            let (_, t) = world.cast(&o, &d).unwrap();
            let p = rg.to_camera(&(o + d * t));
            assert!((p.z - t).abs() < 1e-12);
        }
    }

    #[test]
    fn person_in_front_of_wall_wins() {
        let rg = rig(0.0);
        let world = World {
            wall: 8.0,
            boxes: vec![],
            people: vec![Aabb::on_floor(0.0, 4.0, 0.3, 0.2, 2.5)],
        };
        let (s, t) = world.cast(&rg.origin(), &rg.ray(50.0, 40.0)).unwrap();
        assert_eq!(s, Surface::Person(1));
        assert_eq!(t, 3.8);
    }

    #[test]
    fn edge_rays_count_as_hits() {
        let b = Aabb::new(Vector3::new(-1.0, 1.0, -1.0), Vector3::new(1.0, 2.0, 1.0));
        let o = Vector3::zeros();
        let d = Vector3::new(1.0 / 3.0, 1.0 / 3.0, 0.0) * 3.0;
        assert!(b.hit(&o, &d, EDGE_PAD).is_some());
        assert!(b.hit(&o, &Vector3::new(0.0, -1.0, 0.0), EDGE_PAD).is_none());
    }
}
