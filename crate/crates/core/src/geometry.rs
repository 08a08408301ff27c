//! Shoebox room approximation from planar surface observations, and the
//! remapping of listener/source poses into that shoebox.
//!
//! Conventions: `z` is up (gravity along `-z`). Plane normals point into the
//! room, so a floor has a normal close to `+z` and the wall at the minimum
//! `x` of the room has a normal close to `+x`. The room-local frame is the
//! world frame rotated about `z` by `frame_yaw`; "box coordinates" are
//! room-local coordinates shifted so that the minimum corner is the origin.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Normals within this angle of an axis belong to that axis' face family.
pub const FACE_TOLERANCE_DEG: f64 = 15.0;
/// Offset of unobserved faces from the listener, in meters.
pub const DEFAULT_FACE_OFFSET: f64 = 3.0;
/// Weight of the previous bound in [`update_shoebox`].
pub const SMOOTHING: f64 = 0.8;
/// Per-update decay of face support confidence.
pub const CONFIDENCE_DECAY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneExtent {
    pub width: f64,
    pub height: f64,
}

/// Observed planar patch `normal . p = offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    pub extent: PlaneExtent,
    pub confidence: f64,
    pub timestamp: f64,
}

impl Plane {
    /// Normalizes `normal` (and scales `offset` accordingly).
    pub fn new(normal: Vec3, offset: f64, extent: PlaneExtent, confidence: f64, timestamp: f64) -> Result<Self> {
        let norm = normal.norm();
        if !(norm > 1e-12) || !offset.is_finite() {
            return Err(Error::DegenerateInput("plane normal must be nonzero and finite".into()));
        }
        if !(extent.width >= 0.0 && extent.height >= 0.0) {
            return Err(Error::DegenerateInput("plane extent must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::DegenerateInput(format!("plane confidence {confidence} outside [0, 1]")));
        }
        Ok(Self { normal: normal / norm, offset: offset / norm, extent, confidence, timestamp })
    }

    /// Re-checks the invariants of a deserialized plane.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.normal, self.offset, self.extent, self.confidence, self.timestamp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn at(position: Vec3) -> Self {
        Self { position, orientation: UnitQuaternion::identity() }
    }
}

/// The six faces of the shoebox, in the order used for face ids 0..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    /// Minimum x ("west").
    XMin,
    /// Maximum x ("east").
    XMax,
    /// Minimum y ("south").
    YMin,
    /// Maximum y ("north").
    YMax,
    /// Floor.
    ZMin,
    /// Ceiling.
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Face> {
        Self::ALL.get(id).copied()
    }

    pub fn axis(self) -> usize {
        self.id() / 2
    }

    pub fn is_max(self) -> bool {
        self.id() % 2 == 1
    }

    /// Inward unit normal in room-local coordinates.
    pub fn inward_normal(self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis()] = if self.is_max() { -1.0 } else { 1.0 };
        n
    }
}

/// Axis-aligned cuboid in a gravity-aligned, yaw-fitted room frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShoeboxModel {
    pub frame_yaw: f64,
    pub min_corner: Vec3,
    pub max_corner: Vec3,
    /// Support confidence per face, indexed by [`Face::id`].
    pub support: [f64; 6],
    /// Bounds before the most recent update.
    pub previous: Option<(Vec3, Vec3)>,
}

impl ShoeboxModel {
    /// A fully supported box; `yaw` is wrapped into `[-pi, pi)`.
    pub fn new(frame_yaw: f64, min_corner: Vec3, max_corner: Vec3) -> Result<Self> {
        let model = Self { frame_yaw: wrap_angle(frame_yaw), min_corner, max_corner, support: [1.0; 6], previous: None };
        model.validate()?;
        Ok(model)
    }

    /// Box `[0, dims]` with zero yaw.
    pub fn from_dimensions(dims: Vec3) -> Result<Self> {
        Self::new(0.0, Vec3::zeros(), dims)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.min_corner.iter().chain(self.max_corner.iter()).all(|v| v.is_finite());
        if !finite || (0..3).any(|a| !(self.max_corner[a] > self.min_corner[a])) {
            return Err(Error::InvalidGeometry(format!(
                "max corner {:?} must exceed min corner {:?}",
                self.max_corner.as_slice(),
                self.min_corner.as_slice()
            )));
        }
        if !(-PI..PI).contains(&self.frame_yaw) {
            return Err(Error::InvalidGeometry(format!("yaw {} outside [-pi, pi)", self.frame_yaw)));
        }
        Ok(())
    }

    pub fn dimensions(&self) -> Vec3 {
        self.max_corner - self.min_corner
    }

    pub fn volume(&self) -> f64 {
        let d = self.dimensions();
        d.x * d.y * d.z
    }

    pub fn face_area(&self, face: Face) -> f64 {
        let d = self.dimensions();
        match face.axis() {
            0 => d.y * d.z,
            1 => d.x * d.z,
            _ => d.x * d.y,
        }
    }

    pub fn total_area(&self) -> f64 {
        Face::ALL.iter().map(|&f| self.face_area(f)).sum()
    }

    /// Coordinate of a face plane along its axis (room-local).
    pub fn bound(&self, face: Face) -> f64 {
        if face.is_max() {
            self.max_corner[face.axis()]
        } else {
            self.min_corner[face.axis()]
        }
    }

    fn set_bound(&mut self, face: Face, value: f64) {
        if face.is_max() {
            self.max_corner[face.axis()] = value;
        } else {
            self.min_corner[face.axis()] = value;
        }
    }

    pub fn world_to_local_rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::z_axis(), -self.frame_yaw)
    }

    pub fn to_local(&self, world: &Vec3) -> Vec3 {
        self.world_to_local_rotation() * world
    }

    /// World point to box coordinates (min corner at the origin).
    pub fn to_box(&self, world: &Vec3) -> Vec3 {
        self.to_local(world) - self.min_corner
    }

    pub fn box_to_world(&self, boxed: &Vec3) -> Vec3 {
        self.world_to_local_rotation().inverse() * (boxed + self.min_corner)
    }

    /// Whether a point in box coordinates lies inside the box (inclusive).
    pub fn contains_box_point(&self, p: &Vec3) -> bool {
        let d = self.dimensions();
        (0..3).all(|a| p[a] >= 0.0 && p[a] <= d[a])
    }

    /// Largest absolute change of any bound relative to `other`.
    pub fn max_bound_change(&self, other: &ShoeboxModel) -> f64 {
        (self.min_corner - other.min_corner).abs().max().max((self.max_corner - other.max_corner).abs().max())
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

struct FaceCandidate {
    coordinate: f64,
    confidence: f64,
}

/// Sorts planes into face families in the frame given by `yaw`.
fn classify(planes: &[Plane], yaw: f64) -> [Vec<FaceCandidate>; 6] {
    let cos_tol = FACE_TOLERANCE_DEG.to_radians().cos();
    let to_local = Rotation3::from_axis_angle(&Vec3::z_axis(), -yaw);
    let mut families: [Vec<FaceCandidate>; 6] = Default::default();
    for plane in planes {
        let n = to_local * plane.normal;
        for face in Face::ALL {
            let component = n[face.axis()];
            let inward = if face.is_max() { -component } else { component };
            if inward >= cos_tol {
                families[face.id()].push(FaceCandidate { coordinate: plane.offset / component, confidence: plane.confidence });
                break;
            }
        }
    }
    families
}

/// Bound and support for one face: the most outward plane among those whose
/// confidence is at least half the best confidence in the family.
fn select_bound(face: Face, family: &[FaceCandidate]) -> Option<(f64, f64)> {
    let best = family.iter().map(|c| c.confidence).fold(f64::NEG_INFINITY, f64::max);
    family
        .iter()
        .filter(|c| c.confidence >= 0.5 * best)
        .max_by(|a, b| {
            let (x, y) = if face.is_max() { (a.coordinate, b.coordinate) } else { (b.coordinate, a.coordinate) };
            x.total_cmp(&y).then(a.confidence.total_cmp(&b.confidence))
        })
        .map(|c| (c.coordinate, c.confidence))
}

fn is_vertical(plane: &Plane) -> bool {
    plane.normal.z.abs() <= FACE_TOLERANCE_DEG.to_radians().sin()
}

/// Dominant wall heading modulo 90 degrees, in `[-pi/4, pi/4)`.
fn dominant_yaw(planes: &[Plane]) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for p in planes.iter().filter(|p| is_vertical(p)) {
        let heading = p.normal.y.atan2(p.normal.x);
        let w = p.confidence.max(1e-6);
        c += w * (4.0 * heading).cos();
        s += w * (4.0 * heading).sin();
    }
    let yaw = s.atan2(c) / 4.0;
    if yaw >= FRAC_PI_4 {
        yaw - 2.0 * FRAC_PI_4
    } else {
        yaw
    }
}

/// Fits a shoebox to plane observations. Faces without a supporting plane
/// are placed [`DEFAULT_FACE_OFFSET`] from `listener` (world coordinates)
/// with zero support.
pub fn estimate_shoebox(planes: &[Plane], listener: &Vec3) -> Result<ShoeboxModel> {
    let cos_tol = FACE_TOLERANCE_DEG.to_radians().cos();
    if !planes.iter().any(|p| p.normal.z >= cos_tol) {
        return Err(Error::InsufficientPlanes("no floor plane (normal within 15 degrees of up)".into()));
    }
    if !planes.iter().any(is_vertical) {
        return Err(Error::InsufficientPlanes("no vertical wall plane".into()));
    }

    let yaw = dominant_yaw(planes);
    let families = classify(planes, yaw);
    let to_local = Rotation3::from_axis_angle(&Vec3::z_axis(), -yaw);
    let anchor = to_local * listener;

    let mut min_corner = Vec3::zeros();
    let mut max_corner = Vec3::zeros();
    let mut support = [0.0; 6];
    let mut observed = [false; 6];
    for face in Face::ALL {
        let (coord, conf) = match select_bound(face, &families[face.id()]) {
            Some((coord, conf)) => {
                observed[face.id()] = true;
                (coord, conf)
            }
            None => {
                let sign = if face.is_max() { 1.0 } else { -1.0 };
                (anchor[face.axis()] + sign * DEFAULT_FACE_OFFSET, 0.0)
            }
        };
        support[face.id()] = conf;
        if face.is_max() {
            max_corner[face.axis()] = coord;
        } else {
            min_corner[face.axis()] = coord;
        }
    }

    // A defaulted face must still lie beyond its observed opposite.
    for axis in 0..3 {
        let (lo, hi) = (2 * axis, 2 * axis + 1);
        if max_corner[axis] > min_corner[axis] {
            continue;
        }
        match (observed[lo], observed[hi]) {
            (true, false) => max_corner[axis] = min_corner[axis] + DEFAULT_FACE_OFFSET,
            (false, true) => min_corner[axis] = max_corner[axis] - DEFAULT_FACE_OFFSET,
            _ => {
                return Err(Error::InsufficientPlanes(format!("inconsistent bounds along axis {axis}")));
            }
        }
    }

    let model = ShoeboxModel { frame_yaw: wrap_angle(yaw), min_corner, max_corner, support, previous: None };
    model.validate()?;
    Ok(model)
}

/// One smoothing tick: faces with fresh support move towards the fresh
/// bound by `1 - SMOOTHING`; support confidences decay by
/// `CONFIDENCE_DECAY` and are raised to fresh support where present.
pub fn update_shoebox(model: &ShoeboxModel, planes: &[Plane]) -> ShoeboxModel {
    let families = classify(planes, model.frame_yaw);
    let mut next = model.clone();
    next.previous = Some((model.min_corner, model.max_corner));
    for face in Face::ALL {
        let decayed = model.support[face.id()] * CONFIDENCE_DECAY;
        match select_bound(face, &families[face.id()]) {
            Some((fresh, conf)) => {
                let blended = SMOOTHING * model.bound(face) + (1.0 - SMOOTHING) * fresh;
                next.set_bound(face, blended);
                next.support[face.id()] = decayed.max(conf);
            }
            None => next.support[face.id()] = decayed,
        }
    }
    for axis in 0..3 {
        if !(next.max_corner[axis] > next.min_corner[axis]) {
            next.min_corner[axis] = model.min_corner[axis];
            next.max_corner[axis] = model.max_corner[axis];
        }
    }
    next
}

/// Proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0))
    }
}

/// Deterministic unit vector perpendicular to `v`: with `i` the index of the
/// largest-magnitude component (lowest index on ties) and `j = i + 1 mod 3`,
/// the vector has `-v[j]` at `i`, `v[i]` at `j` and zero elsewhere.
fn perpendicular(v: &Vec3) -> Vec3 {
    let i = (0..3).fold(0, |best, k| if v[k].abs() > v[best].abs() { k } else { best });
    let j = (i + 1) % 3;
    let mut p = Vec3::zeros();
    p[i] = -v[j];
    p[j] = v[i];
    p.normalize()
}

/// Smallest-angle rotation taking the direction of `v_orig` onto the
/// direction of `v_new`.
pub fn minimal_rotation(v_orig: &Vec3, v_new: &Vec3) -> Result<RotationMatrix> {
    let (na, nb) = (v_orig.norm(), v_new.norm());
    if !(na >= 1e-12 && nb >= 1e-12) {
        return Err(Error::DegenerateInput("minimal_rotation needs nonzero vectors".into()));
    }
    let a = v_orig / na;
    let b = v_new / nb;
    let cross = a.cross(&b);
    let cos = a.dot(&b);
    let sin = cross.norm();
    let k = cross.cross_matrix();

    let m = if cos > 0.0 {
        // I + [v]x + [v]x^2 / (1 + c), well conditioned away from antipodes.
        Matrix3::identity() + k + k * k / (1.0 + cos)
    } else if sin > 1e-12 {
        let axis = cross / sin;
        let ka = axis.cross_matrix();
        Matrix3::identity() + ka * sin + ka * ka * (1.0 - cos)
    } else {
        // Antipodal: half turn about a deterministic perpendicular axis.
        let p = perpendicular(&a);
        Matrix3::identity() * -1.0 + p * p.transpose() * 2.0
    };
    Ok(RotationMatrix(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Min,
    Max,
}

/// Distance to the nearest real surface along one room-local axis, and which
/// side of the room that surface is on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallDistance {
    pub side: Side,
    pub distance: f64,
}

pub type WallDistances = [WallDistance; 3];

/// Wall distances of a box-coordinate point to the nearest face per axis.
pub fn wall_distances_in_box(point: &Vec3, dims: &Vec3) -> WallDistances {
    std::array::from_fn(|axis| {
        let to_min = point[axis];
        let to_max = dims[axis] - point[axis];
        if to_min <= to_max {
            WallDistance { side: Side::Min, distance: to_min }
        } else {
            WallDistance { side: Side::Max, distance: to_max }
        }
    })
}

/// The other entity of a source/listener pair: its original world pose and
/// its already mapped position in box coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Companion {
    pub original: Pose,
    pub mapped_position: Vec3,
}

/// Places an entity in box coordinates so that its distances to the three
/// corresponding shoebox faces equal the measured real-world distances. With
/// a companion, the orientation is additionally rotated by the minimal
/// rotation between the original and the remapped connecting vector.
pub fn map_pose_into_shoebox(
    entity: &Pose,
    walls: &WallDistances,
    shoebox: &ShoeboxModel,
    companion: Option<&Companion>,
) -> Result<Pose> {
    let dims = shoebox.dimensions();
    let mut position = Vec3::zeros();
    for (axis, wall) in walls.iter().enumerate() {
        if !(wall.distance >= 0.0) {
            return Err(Error::DegenerateInput(format!("negative wall distance on axis {axis}")));
        }
        if wall.distance > dims[axis] {
            return Err(Error::OutOfRoom(format!(
                "distance {} exceeds room dimension {} on axis {axis}",
                wall.distance, dims[axis]
            )));
        }
        position[axis] = match wall.side {
            Side::Min => wall.distance,
            Side::Max => dims[axis] - wall.distance,
        };
    }

    let to_local = UnitQuaternion::from_rotation_matrix(&shoebox.world_to_local_rotation());
    let mut orientation = to_local * entity.orientation;
    if let Some(other) = companion {
        let v_orig = to_local * (other.original.position - entity.position);
        let v_new = other.mapped_position - position;
        if v_orig.norm() >= 1e-12 && v_new.norm() >= 1e-12 {
            let r = minimal_rotation(&v_orig, &v_new)?;
            orientation = r.to_quaternion() * orientation;
        }
    }
    Ok(Pose { position, orientation })
}
