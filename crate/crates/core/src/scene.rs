//! Planar scene: primitive objects, gripper finger layouts and contact resolution.
//!
//! The world is the X-Y cross-section seen from above the palm. Every object is a
//! 2-D primitive (circle, square, rectangle, equilateral triangle) standing in for
//! the cross-section of a ball, cube, cuboid or prism. The gripper has three
//! fingers; each base mode places them on a fixed layout around the grasp center
//! (the origin of the gripper frame), and the whole layout can be rotated about
//! that center by `base_rotation`.
//!
//! A finger closes along its approach ray. The proximal joint twists the finger
//! pad about its own long axis: it changes the pad facing direction but not the
//! point where the finger meets the object. The signed angle between the surface
//! normal and the pad facing is the finger twist that produces `T_z`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-norm tolerance for contact normals.
pub const NORMAL_TOLERANCE: f64 = 1e-12;

/// Rays closer than this (cosine) to tangency are treated as missing the object.
const GRAZING_COS: f64 = 1e-6;

/// Edge-parameter distance under which a hit is snapped to a polygon corner.
const CORNER_SNAP: f64 = 1e-9;

pub type Vec2 = Vector2<f64>;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = (angle + PI).rem_euclid(TAU) - PI;
    if a <= -PI {
        a += TAU;
    }
    a
}

/// Normalizes an orientation into `[0, 2π)`.
pub fn normalize_orientation(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

pub fn rotate(v: &Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

pub fn unit_from_angle(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c, s)
}

pub fn angle_of(v: &Vec2) -> f64 {
    v.y.atan2(v.x)
}

/// 2-D cross product `a × b` (z component).
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counter-clockwise perpendicular.
pub fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Signed twist of a finger pad: the angle from the inward surface normal to the
/// pad facing direction, in `(-π, π]`.
pub fn twist_angle(facing: &Vec2, normal: &Vec2) -> f64 {
    cross(normal, facing).atan2(normal.dot(facing))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Circle {
        radius: f64,
    },
    Square {
        side: f64,
    },
    Rectangle {
        width: f64,
        height: f64,
    },
    /// Equilateral triangle (prism cross-section). At orientation 0 one face is on
    /// top with its outward normal along +Y.
    Triangle {
        side: f64,
    },
}

impl ShapeKind {
    fn sizes(&self) -> Vec<f64> {
        match *self {
            ShapeKind::Circle { radius } => vec![radius],
            ShapeKind::Square { side } | ShapeKind::Triangle { side } => vec![side],
            ShapeKind::Rectangle { width, height } => vec![width, height],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Circle { .. } => "circle",
            ShapeKind::Square { .. } => "square",
            ShapeKind::Rectangle { .. } => "rectangle",
            ShapeKind::Triangle { .. } => "triangle",
        }
    }

    /// Polygon vertices in the object frame, counter-clockwise. Empty for circles.
    pub fn local_vertices(&self) -> Vec<Vec2> {
        match *self {
            ShapeKind::Circle { .. } => Vec::new(),
            ShapeKind::Square { side } => box_vertices(side, side),
            ShapeKind::Rectangle { width, height } => box_vertices(width, height),
            ShapeKind::Triangle { side } => {
                let circumradius = side / 3f64.sqrt();
                [-FRAC_PI_2, PI / 6.0, 5.0 * PI / 6.0]
                    .iter()
                    .map(|a| unit_from_angle(*a) * circumradius)
                    .collect()
            }
        }
    }

    /// Largest distance from the centroid to the boundary.
    pub fn circumradius(&self) -> f64 {
        match *self {
            ShapeKind::Circle { radius } => radius,
            ShapeKind::Square { side } => side / 2f64.sqrt(),
            ShapeKind::Rectangle { width, height } => 0.5 * width.hypot(height),
            ShapeKind::Triangle { side } => side / 3f64.sqrt(),
        }
    }
}

fn box_vertices(width: f64, height: f64) -> Vec<Vec2> {
    let (hw, hh) = (0.5 * width, 0.5 * height);
    vec![
        Vec2::new(-hw, -hh),
        Vec2::new(hw, -hh),
        Vec2::new(hw, hh),
        Vec2::new(-hw, hh),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    /// Orientation in `[0, 2π)`.
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_orientation(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn to_world(&self, local: &Vec2) -> Vec2 {
        rotate(local, self.theta) + self.position()
    }
}

/// A planar object: a primitive shape at a pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectShape {
    pub shape: ShapeKind,
    pub pose: Pose2,
}

impl ObjectShape {
    pub fn new(shape: ShapeKind, pose: Pose2) -> Result<Self> {
        let object = Self {
            shape,
            pose: Pose2::new(pose.x, pose.y, pose.theta),
        };
        object.validate()?;
        Ok(object)
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .shape
            .sizes()
            .iter()
            .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::Geometry(format!(
                "{} size parameters must be finite and strictly positive",
                self.shape.name()
            )));
        }
        if ![self.pose.x, self.pose.y, self.pose.theta]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Geometry("pose must be finite".into()));
        }
        Ok(())
    }

    pub fn centroid(&self) -> Vec2 {
        self.pose.position()
    }

    /// Polygon vertices in world coordinates (counter-clockwise); empty for circles.
    pub fn vertices(&self) -> Vec<Vec2> {
        self.shape
            .local_vertices()
            .iter()
            .map(|v| self.pose.to_world(v))
            .collect()
    }

    /// Distance from `p` to the object boundary.
    pub fn boundary_distance(&self, p: &Vec2) -> f64 {
        match self.shape {
            ShapeKind::Circle { radius } => ((p - self.centroid()).norm() - radius).abs(),
            _ => {
                let verts = self.vertices();
                (0..verts.len())
                    .map(|k| segment_distance(p, &verts[k], &verts[(k + 1) % verts.len()]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Rigid motion about the world origin followed by a translation.
    pub fn transformed(&self, rotation: f64, translation: Vec2) -> Self {
        let p = rotate(&self.centroid(), rotation) + translation;
        Self {
            shape: self.shape,
            pose: Pose2::new(p.x, p.y, self.pose.theta + rotation),
        }
    }
}

fn segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let u = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * u - p).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseMode {
    Circular,
    Lateral,
    Parallel,
}

impl std::fmt::Display for BaseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaseMode::Circular => "Circular",
            BaseMode::Lateral => "Lateral",
            BaseMode::Parallel => "Parallel",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerCommand {
    /// Pad twist offset from the layout's nominal facing, radians about Z.
    pub proximal: f64,
    /// Commanded squeeze, N.
    pub grip: f64,
    pub active: bool,
}

/// Index of the finger whose proximal axis lies on the mid-plane in Lateral mode.
pub const MID_PLANE_FINGER: usize = 0;

/// Largest proximal offset a finger can reach from its nominal facing.
pub const MAX_PROXIMAL: f64 = PI / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperConfiguration {
    pub base_mode: BaseMode,
    /// Rotation of the whole finger layout about the grasp center, radians.
    pub base_rotation: f64,
    pub fingers: [FingerCommand; 3],
}

impl GripperConfiguration {
    pub fn new(base_mode: BaseMode, base_rotation: f64, grip: f64) -> Self {
        Self {
            base_mode,
            base_rotation,
            fingers: [FingerCommand {
                proximal: 0.0,
                grip,
                active: true,
            }; 3],
        }
    }

    pub fn active_count(&self) -> usize {
        self.fingers.iter().filter(|f| f.active).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.active_count() < 2 {
            return Err(Error::Config(format!(
                "at least 2 active fingers required, got {}",
                self.active_count()
            )));
        }
        if !self.base_rotation.is_finite() {
            return Err(Error::Config("base rotation must be finite".into()));
        }
        for (i, f) in self.fingers.iter().enumerate() {
            if !(f.grip.is_finite() && f.grip >= 0.0) {
                return Err(Error::Config(format!("finger {i}: grip must be >= 0")));
            }
            if !(f.proximal.is_finite() && f.proximal.abs() <= MAX_PROXIMAL) {
                return Err(Error::Config(format!(
                    "finger {i}: proximal offset {:.4} rad leaves the {} layout",
                    f.proximal, self.base_mode
                )));
            }
        }
        Ok(())
    }
}

/// Gripper dimensions. None of these come with the hardware description, so they
/// are read from the scene file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperGeometry {
    /// Distance from the grasp center to each finger base, m.
    pub base_radius: f64,
    /// Half spacing of the two same-side fingers in Parallel mode, m.
    pub parallel_half_spacing: f64,
    /// Contact pad width, m.
    pub pad_width: f64,
    /// Closure per newton of grip command is `1 / pad_stiffness`, N/m.
    pub pad_stiffness: f64,
    /// Maximum soft-finger compression, m.
    pub max_compression: f64,
}

impl Default for GripperGeometry {
    fn default() -> Self {
        Self {
            base_radius: 0.08,
            parallel_half_spacing: 0.015,
            pad_width: 0.02,
            pad_stiffness: 2000.0,
            max_compression: 0.01,
        }
    }
}

impl GripperGeometry {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.base_radius,
            self.parallel_half_spacing,
            self.pad_width,
            self.pad_stiffness,
            self.max_compression,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(Error::Config(
                "gripper geometry constants must be finite and positive".into(),
            ));
        }
        if self.parallel_half_spacing >= self.base_radius {
            return Err(Error::Config(
                "parallel_half_spacing must be smaller than base_radius".into(),
            ));
        }
        Ok(())
    }

    /// Nominal (base, approach) of each finger in the unrotated gripper frame.
    pub fn layout(&self, mode: BaseMode) -> [(Vec2, Vec2); 3] {
        let r = self.base_radius;
        match mode {
            BaseMode::Circular => {
                let at = |deg: f64| {
                    let u = unit_from_angle(deg.to_radians());
                    (u * r, -u)
                };
                [at(90.0), at(210.0), at(330.0)]
            }
            BaseMode::Lateral => [
                (Vec2::new(0.0, r), Vec2::new(0.0, -1.0)),
                (Vec2::new(-r, 0.0), Vec2::new(1.0, 0.0)),
                (Vec2::new(r, 0.0), Vec2::new(-1.0, 0.0)),
            ],
            BaseMode::Parallel => {
                let g = self.parallel_half_spacing;
                [
                    (Vec2::new(0.0, r), Vec2::new(0.0, -1.0)),
                    (Vec2::new(-g, -r), Vec2::new(0.0, 1.0)),
                    (Vec2::new(g, -r), Vec2::new(0.0, 1.0)),
                ]
            }
        }
    }

    /// Direction, in the unrotated gripper frame, along which the mode squeezes
    /// its opposing fingers.
    pub fn pinch_axis_angle(mode: BaseMode) -> f64 {
        match mode {
            BaseMode::Circular | BaseMode::Parallel => FRAC_PI_2,
            BaseMode::Lateral => 0.0,
        }
    }

    pub fn finger_frames(&self, config: &GripperConfiguration) -> [FingerFrame; 3] {
        let layout = self.layout(config.base_mode);
        std::array::from_fn(|i| {
            let (base, approach) = layout[i];
            let base = rotate(&base, config.base_rotation);
            let approach = rotate(&approach, config.base_rotation);
            FingerFrame {
                base,
                approach,
                facing: rotate(&approach, config.fingers[i].proximal),
            }
        })
    }

    /// Pad compression produced by a grip command.
    pub fn closure(&self, grip: f64) -> f64 {
        (grip / self.pad_stiffness).clamp(0.0, self.max_compression)
    }
}

/// World-frame placement of one finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerFrame {
    pub base: Vec2,
    /// Unit closing direction.
    pub approach: Vec2,
    /// Unit pad normal (the finger-frame X axis).
    pub facing: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPatch {
    pub point: Vec2,
    /// Inward unit surface normal: the direction the finger pushes the object.
    pub normal: Vec2,
    /// Soft-finger compression, m. Zero means touching without load.
    pub depth: f64,
    /// Length of the conformed contact, m.
    pub extent: f64,
    /// Offset of the contact centroid from the pad center along the finger Y axis, m.
    pub offset: f64,
}

impl ContactPatch {
    /// A bare patch with no extent or offset, mostly for tests and probes.
    pub fn simple(point: Vec2, normal: Vec2, depth: f64) -> Self {
        Self {
            point,
            normal,
            depth,
            extent: 0.0,
            offset: 0.0,
        }
    }
}

/// First boundary hit of a ray, before pad effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub point: Vec2,
    pub normal: Vec2,
    /// Face the ray entered through; `None` for curved surfaces and corners.
    pub face: Option<(Vec2, Vec2)>,
}

/// Intersects a ray with the object boundary; returns the entry point nearest the origin.
pub fn ray_hit(object: &ObjectShape, origin: &Vec2, dir: &Vec2) -> Option<RayHit> {
    match object.shape {
        ShapeKind::Circle { radius } => {
            let oc = origin - object.centroid();
            let b = dir.dot(&oc);
            let c = oc.norm_squared() - radius * radius;
            if c <= 0.0 {
                return None;
            }
            let disc = b * b - c;
            if disc <= 0.0 {
                return None;
            }
            let t = -b - disc.sqrt();
            if t <= 0.0 {
                return None;
            }
            let point = origin + dir * t;
            let normal = (object.centroid() - point).normalize();
            if normal.dot(dir) < GRAZING_COS {
                return None;
            }
            Some(RayHit {
                t,
                point,
                normal,
                face: None,
            })
        }
        _ => ray_hit_polygon(&object.vertices(), origin, dir),
    }
}

fn ray_hit_polygon(verts: &[Vec2], origin: &Vec2, dir: &Vec2) -> Option<RayHit> {
    let n = verts.len();
    let outward = |k: usize| {
        let e = verts[(k + 1) % n] - verts[k];
        Vec2::new(e.y, -e.x).normalize()
    };
    let mut best: Option<(f64, usize, f64)> = None;
    for k in 0..n {
        let a = verts[k];
        let e = verts[(k + 1) % n] - a;
        let denom = cross(dir, &e);
        if denom.abs() < 1e-300 {
            continue;
        }
        let ao = a - origin;
        let t = cross(&ao, &e) / denom;
        let u = cross(&ao, dir) / denom;
        if t > 0.0
            && (-CORNER_SNAP..=1.0 + CORNER_SNAP).contains(&u)
            && dir.dot(&outward(k)) < 0.0
            && best.is_none_or(|(bt, _, _)| t < bt)
        {
            best = Some((t, k, u));
        }
    }
    let (t, k, u) = best?;
    let point = origin + dir * t;
    let corner = if u <= CORNER_SNAP {
        Some((k + n - 1) % n)
    } else if u >= 1.0 - CORNER_SNAP {
        Some((k + 1) % n)
    } else {
        None
    };
    match corner {
        Some(_) => {
            // Snap to the vertex and use the angle-bisector normal.
            let (prev, next) = if u <= CORNER_SNAP {
                ((k + n - 1) % n, k)
            } else {
                (k, (k + 1) % n)
            };
            let vertex = if u <= CORNER_SNAP {
                verts[k]
            } else {
                verts[(k + 1) % n]
            };
            let normal = -(outward(prev) + outward(next)).normalize();
            // A ray running along either adjacent face only grazes the corner.
            let grazes = |k: usize| dir.dot(&outward(k)).abs() < GRAZING_COS;
            if grazes(prev) || grazes(next) || normal.dot(dir) < GRAZING_COS {
                return None;
            }
            Some(RayHit {
                t: (vertex - origin).dot(dir),
                point: vertex,
                normal,
                face: None,
            })
        }
        None => {
            let normal = -outward(k);
            if normal.dot(dir) < GRAZING_COS {
                return None;
            }
            Some(RayHit {
                t,
                point,
                normal,
                face: Some((verts[k], verts[(k + 1) % n])),
            })
        }
    }
}

/// Builds the conformed patch for a hit: pad of `pad_width` centered on the hit,
/// clipped to the face for flat faces, chord of the compressed arc for circles.
pub fn patch_from_hit(
    object: &ObjectShape,
    hit: &RayHit,
    facing: &Vec2,
    depth: f64,
    pad_width: f64,
) -> ContactPatch {
    let (extent, offset) = match (object.shape, hit.face) {
        (ShapeKind::Circle { radius }, _) => {
            let d = depth.min(radius);
            let chord = 2.0 * (2.0 * radius * d - d * d).max(0.0).sqrt();
            (chord.min(pad_width), 0.0)
        }
        (_, Some((a, b))) => {
            let len = (b - a).norm();
            let along = (b - a) / len;
            let s = (hit.point - a).dot(&along);
            let lo = (s - 0.5 * pad_width).max(0.0);
            let hi = (s + 0.5 * pad_width).min(len);
            let mid_shift = 0.5 * (lo + hi) - s;
            let y_axis = perp(facing);
            ((hi - lo).max(0.0), mid_shift * along.dot(&y_axis))
        }
        (_, None) => (0.0, 0.0),
    };
    ContactPatch {
        point: hit.point,
        normal: hit.normal,
        depth,
        extent,
        offset,
    }
}

/// Resolves where each active finger meets the object.
///
/// Inactive fingers, fingers whose ray misses or grazes the object, and fingers
/// with a zero grip command report no contact.
pub fn resolve_contacts(
    object: &ObjectShape,
    config: &GripperConfiguration,
    geometry: &GripperGeometry,
) -> Vec<(usize, Option<ContactPatch>)> {
    geometry
        .finger_frames(config)
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let command = &config.fingers[i];
            if !command.active || command.grip <= 0.0 {
                return (i, None);
            }
            let patch = ray_hit(object, &frame.base, &frame.approach).map(|hit| {
                patch_from_hit(
                    object,
                    &hit,
                    &frame.facing,
                    geometry.closure(command.grip),
                    geometry.pad_width,
                )
            });
            (i, patch)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseNoiseSpec {
    /// Radius of the uniform translation disc, m.
    pub translation_radius: f64,
    /// Half range of the uniform orientation noise, radians.
    pub rotation_half_range: f64,
}

impl Default for PoseNoiseSpec {
    fn default() -> Self {
        Self {
            translation_radius: 0.005,
            rotation_half_range: 10f64.to_radians(),
        }
    }
}

impl PoseNoiseSpec {
    pub fn none() -> Self {
        Self {
            translation_radius: 0.0,
            rotation_half_range: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.translation_radius >= 0.0 && self.rotation_half_range >= 0.0) {
            return Err(Error::Config("pose noise magnitudes must be >= 0".into()));
        }
        Ok(())
    }
}

/// Displaces an object by a uniform draw from a disc and a uniform rotation.
pub fn perturb_pose<R: Rng + ?Sized>(
    object: &ObjectShape,
    noise: &PoseNoiseSpec,
    rng: &mut R,
) -> ObjectShape {
    if noise.translation_radius == 0.0 && noise.rotation_half_range == 0.0 {
        return *object;
    }
    let radius = noise.translation_radius * rng.random::<f64>().sqrt();
    let direction = rng.random::<f64>() * TAU;
    let dtheta = noise.rotation_half_range * (2.0 * rng.random::<f64>() - 1.0);
    let shift = unit_from_angle(direction) * radius;
    ObjectShape {
        shape: object.shape,
        pose: Pose2::new(
            object.pose.x + shift.x,
            object.pose.y + shift.y,
            object.pose.theta + dtheta,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn centered(shape: ShapeKind) -> ObjectShape {
        ObjectShape::new(shape, Pose2::new(0.0, 0.0, 0.0)).unwrap()
    }

    #[test]
    fn rejects_nonpositive_sizes() {
        assert!(
            ObjectShape::new(ShapeKind::Circle { radius: 0.0 }, Pose2::new(0.0, 0.0, 0.0)).is_err()
        );
        assert!(ObjectShape::new(
            ShapeKind::Rectangle {
                width: 0.1,
                height: -1.0
            },
            Pose2::new(0.0, 0.0, 0.0)
        )
        .is_err());
    }

    #[test]
    fn orientation_is_normalized() {
        let p = Pose2::new(0.0, 0.0, -0.5);
        assert!((0.0..TAU).contains(&p.theta));
        assert_relative_eq!(p.theta, TAU - 0.5, epsilon = 1e-12);
        assert_eq!(Pose2::new(0.0, 0.0, -1e-18).theta, 0.0);
    }

    #[test]
    fn circle_circular_contacts_are_symmetric() {
        let circle = centered(ShapeKind::Circle { radius: 0.03 });
        let geom = GripperGeometry::default();
        let config = GripperConfiguration::new(BaseMode::Circular, 0.0, 6.0);
        let contacts = resolve_contacts(&circle, &config, &geom);
        assert_eq!(contacts.len(), 3);
        let depth0 = contacts[0].1.unwrap().depth;
        for (_, c) in &contacts {
            let c = c.unwrap();
            assert_relative_eq!(c.normal.norm(), 1.0, epsilon = NORMAL_TOLERANCE);
            assert_relative_eq!(c.point.norm(), 0.03, epsilon = 1e-12);
            // Normal points at the center.
            assert_relative_eq!(c.normal.dot(&(-c.point / 0.03)), 1.0, epsilon = 1e-12);
            assert_eq!(c.depth, depth0);
        }
    }

    #[test]
    fn parallel_on_square_gives_antiparallel_normals() {
        let square = centered(ShapeKind::Square { side: 0.04 });
        let geom = GripperGeometry::default();
        let config = GripperConfiguration::new(BaseMode::Parallel, 0.0, 6.0);
        let contacts = resolve_contacts(&square, &config, &geom);
        let n0 = contacts[0].1.unwrap().normal;
        let n1 = contacts[1].1.unwrap().normal;
        let n2 = contacts[2].1.unwrap().normal;
        assert_relative_eq!(n0, Vec2::new(0.0, -1.0), epsilon = 1e-12);
        assert_relative_eq!(n1, -n0, epsilon = 1e-12);
        assert_relative_eq!(n2, -n0, epsilon = 1e-12);
        assert_relative_eq!(contacts[1].1.unwrap().point.y, -0.02, epsilon = 1e-12);
    }

    #[test]
    fn inactive_and_missing_fingers_report_no_contact() {
        let small = ObjectShape::new(
            ShapeKind::Circle { radius: 0.005 },
            Pose2::new(0.03, 0.0, 0.0),
        )
        .unwrap();
        let geom = GripperGeometry::default();
        let mut config = GripperConfiguration::new(BaseMode::Circular, 0.0, 6.0);
        config.fingers[2].active = false;
        let contacts = resolve_contacts(&small, &config, &geom);
        assert!(contacts.iter().all(|(_, c)| c.is_none()));
    }

    #[test]
    fn tangent_ray_is_no_contact() {
        let circle = centered(ShapeKind::Circle { radius: 0.01 });
        let origin = Vec2::new(-0.1, 0.01);
        assert!(ray_hit(&circle, &origin, &Vec2::new(1.0, 0.0)).is_none());
        // Ray running along a face.
        let square = centered(ShapeKind::Square { side: 0.02 });
        assert!(ray_hit(&square, &Vec2::new(-0.1, 0.01), &Vec2::new(1.0, 0.0)).is_none());
    }

    #[test]
    fn corner_hit_uses_bisector_normal() {
        let square = centered(ShapeKind::Square { side: 0.02 });
        let dir = Vec2::new(1.0, 1.0).normalize();
        let hit = ray_hit(&square, &Vec2::new(-0.05, -0.05), &dir).unwrap();
        assert_relative_eq!(hit.point, Vec2::new(-0.01, -0.01), epsilon = 1e-12);
        assert_relative_eq!(hit.normal, dir, epsilon = 1e-12);
        assert!(hit.face.is_none());
    }

    #[test]
    fn pad_is_clipped_near_a_corner() {
        let square = centered(ShapeKind::Square { side: 0.04 });
        let origin = Vec2::new(0.015, 0.1);
        let dir = Vec2::new(0.0, -1.0);
        let hit = ray_hit(&square, &origin, &dir).unwrap();
        let patch = patch_from_hit(&square, &hit, &dir, 0.003, 0.02);
        // Pad spans x in [0.005, 0.025], face ends at 0.02.
        assert_relative_eq!(patch.extent, 0.015, epsilon = 1e-12);
        // Centroid shifts toward -x; finger Y axis is perp((0,-1)) = (1,0).
        assert_relative_eq!(patch.offset, -0.0025, epsilon = 1e-12);
    }

    #[test]
    fn twist_sign_convention() {
        let normal = Vec2::new(1.0, 0.0);
        let facing = unit_from_angle(0.2);
        assert_relative_eq!(twist_angle(&facing, &normal), 0.2, epsilon = 1e-12);
        assert_relative_eq!(twist_angle(&normal, &facing), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn zero_noise_is_identity_and_seeded_noise_repeats() {
        let obj = centered(ShapeKind::Square { side: 0.05 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb_pose(&obj, &PoseNoiseSpec::none(), &mut rng), obj);
        let spec = PoseNoiseSpec::default();
        let a = perturb_pose(&obj, &spec, &mut ChaCha8Rng::seed_from_u64(9));
        let b = perturb_pose(&obj, &spec, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.centroid().norm() <= spec.translation_radius);
    }

    #[test]
    fn config_validation() {
        let mut c = GripperConfiguration::new(BaseMode::Lateral, 0.0, 5.0);
        assert!(c.validate().is_ok());
        c.fingers[0].active = false;
        assert!(c.validate().is_ok());
        c.fingers[1].active = false;
        assert!(c.validate().is_err());
        let mut c = GripperConfiguration::new(BaseMode::Lateral, 0.0, 5.0);
        c.fingers[2].proximal = 2.0;
        assert!(c.validate().is_err());
    }
}
