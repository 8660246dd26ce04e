//! Rigid-body primitives shared by every stage of the pipeline.
//!
//! Conventions, used everywhere in the crate:
//!
//! * Quaternions use the Hamilton product and are stored with `w >= 0`.
//! * A [`Pose`] with `frame_from = A` and `frame_to = B` is the pose of frame
//!   `B` expressed in frame `A`. Read as a transform it maps coordinates given
//!   in `B` into `A` (`p_A = R * p_B + t`). Poses chain as `A->B` then `B->C`,
//!   giving `A->C`; the matrix of the result is `T_AB * T_BC`.
//! * Vehicle poses in a pose chain are `world -> radar`: the radar frame is the
//!   body frame of the rig.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Name of the frame every rig extrinsic is expressed relative to.
pub const RADAR_FRAME: &str = "radar";
/// Name of the fixed frame pose chains are expressed in.
pub const WORLD_FRAME: &str = "world";

/// Integer microseconds since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_micros(us: i64) -> Self {
        Timestamp(us)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * 1e6).round() as i64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-6
    }

    /// Signed difference `self - earlier` in microseconds.
    pub fn since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }

    pub fn offset(self, micros: i64) -> Timestamp {
        Timestamp(self.0 + micros)
    }
}

impl std::ops::Sub for Timestamp {
    type Output = i64;

    fn sub(self, rhs: Timestamp) -> i64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Symbolic name of a coordinate frame, e.g. `radar` or `camera_front`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameId(Arc<str>);

impl FrameId {
    pub fn new(name: &str) -> Result<Self> {
        let name = name.trim();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("bad frame name {name:?}")));
        }
        Ok(FrameId(Arc::from(name)))
    }

    pub fn radar() -> Self {
        FrameId(Arc::from(RADAR_FRAME))
    }

    pub fn world() -> Self {
        FrameId(Arc::from(WORLD_FRAME))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Unit quaternion, canonicalised to the `w >= 0` hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    /// Normalises and canonicalises `(w, x, y, z)`.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::invalid(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalised"
            )));
        }
        Ok(Self::from_raw(w / norm, x / norm, y / norm, z / norm))
    }

    /// Renormalises without validation; callers guarantee a non-degenerate input.
    pub(crate) fn normalized_unchecked(w: f64, x: f64, y: f64, z: f64) -> Self {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        Self::from_raw(w / norm, x / norm, y / norm, z / norm)
    }

    fn from_raw(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else {
            // On the w = 0 great circle pick the sign making the first
            // non-zero vector component positive.
            [x, y, z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            UnitQuaternion {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            UnitQuaternion { w, x, y, z }
        }
    }

    pub fn identity() -> Self {
        UnitQuaternion {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Rotation of `angle` radians about `axis` (right-hand rule).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 1e-12) {
            return Err(Error::invalid("zero rotation axis"));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::new(c, s * a.x, s * a.y, s * a.z)
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_raw(c, s, 0.0, 0.0)
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_raw(c, 0.0, s, 0.0)
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_raw(c, 0.0, 0.0, s)
    }

    /// Builds the quaternion of a proper rotation matrix (Shepperd's method).
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let (w, x, y, z) = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            (
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            (
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        Self::new(w, x, y, z)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &UnitQuaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(&self) -> Self {
        Self::from_raw(self.w, -self.x, -self.y, -self.z)
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    /// Hamilton product `self * rhs`, renormalised.
    pub fn mul(&self, rhs: &UnitQuaternion) -> Self {
        let (a, b) = (self, rhs);
        Self::normalized_unchecked(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotates `v` by this quaternion (`q v q*`).
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * v.atan2(self.w.abs())
    }

    /// Angle of the rotation taking `self` to `other`, in `[0, pi]`.
    pub fn angle_to(&self, other: &UnitQuaternion) -> f64 {
        let (a, b) = (self, other);
        // Components of conj(a) * b, without renormalisation.
        let w = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
        let x = a.w * b.x - a.x * b.w - a.y * b.z + a.z * b.y;
        let y = a.w * b.y + a.x * b.z - a.y * b.w - a.z * b.x;
        let z = a.w * b.z - a.x * b.y + a.y * b.x - a.z * b.w;
        2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
    }

    /// Yaw (rotation about +z) of the rotated x axis, in `(-pi, pi]`.
    pub fn yaw(&self) -> f64 {
        let fwd = self.rotate(&Vec3::x());
        fwd.y.atan2(fwd.x)
    }
}

/// Rigid transform between two named frames; see the module docs for the convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
    pub frame_from: FrameId,
    pub frame_to: FrameId,
}

impl Pose {
    pub fn new(
        rotation: UnitQuaternion,
        translation: Vec3,
        frame_from: FrameId,
        frame_to: FrameId,
    ) -> Self {
        Pose {
            rotation,
            translation,
            frame_from,
            frame_to,
        }
    }

    pub fn identity(frame: FrameId) -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
            frame_from: frame.clone(),
            frame_to: frame,
        }
    }

    /// `self` followed by `other`: `frame_from(self) -> frame_to(other)`.
    pub fn compose(&self, other: &Pose) -> Result<Pose> {
        if self.frame_to != other.frame_from {
            return Err(Error::Frame(format!(
                "cannot compose {}->{} with {}->{}",
                self.frame_from, self.frame_to, other.frame_from, other.frame_to
            )));
        }
        Ok(Pose {
            rotation: self.rotation.mul(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
            frame_from: self.frame_from.clone(),
            frame_to: other.frame_to.clone(),
        })
    }

    pub fn inverse(&self) -> Pose {
        let rotation = self.rotation.inverse();
        Pose {
            translation: -rotation.rotate(&self.translation),
            rotation,
            frame_from: self.frame_to.clone(),
            frame_to: self.frame_from.clone(),
        }
    }

    /// Maps a point given in `frame_to` coordinates into `frame_from`.
    pub fn transform_point(&self, pt: &Vec3) -> Vec3 {
        self.rotation.rotate(pt) + self.translation
    }

    /// Rotation angle and translation distance separating two poses.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        (
            self.rotation.angle_to(&other.rotation),
            (self.translation - other.translation).norm(),
        )
    }

    /// Relabels the frames without touching the transform.
    pub fn with_frames(mut self, frame_from: FrameId, frame_to: FrameId) -> Pose {
        self.frame_from = frame_from;
        self.frame_to = frame_to;
        self
    }
}

/// Extrinsics of every sensor on the rig, each expressed as `radar -> sensor`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRig {
    extrinsics: BTreeMap<FrameId, Pose>,
}

impl Default for SensorRig {
    fn default() -> Self {
        Self::new()
    }
}

impl SensorRig {
    pub fn new() -> Self {
        let mut extrinsics = BTreeMap::new();
        extrinsics.insert(FrameId::radar(), Pose::identity(FrameId::radar()));
        SensorRig { extrinsics }
    }

    /// Registers `frame` at `rotation`/`translation` relative to the radar.
    pub fn insert(&mut self, frame: FrameId, rotation: UnitQuaternion, translation: Vec3) {
        let pose = Pose::new(rotation, translation, FrameId::radar(), frame.clone());
        self.extrinsics.insert(frame, pose);
    }

    /// `radar -> frame` extrinsic.
    pub fn extrinsic(&self, frame: &FrameId) -> Result<&Pose> {
        self.extrinsics
            .get(frame)
            .ok_or_else(|| Error::Frame(format!("no extrinsic for frame {frame}")))
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameId> {
        self.extrinsics.keys()
    }

    /// Parses `frame = x, y, z, qw, qx, qy, qz` lines; `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rig = SensorRig::new();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::format(path, format!("line {}: {msg}", lineno + 1));
            let (name, values) = line
                .split_once('=')
                .ok_or_else(|| err("expected `frame = x, y, z, qw, qx, qy, qz`".into()))?;
            let frame = FrameId::new(name).map_err(|e| err(e.to_string()))?;
            if !seen.insert(frame.clone()) {
                return Err(err(format!("duplicate frame {frame}")));
            }
            let v = parse_floats(values).map_err(err)?;
            if v.len() != 7 {
                return Err(err(format!("expected 7 values, got {}", v.len())));
            }
            let q = UnitQuaternion::new(v[3], v[4], v[5], v[6]).map_err(|e| err(e.to_string()))?;
            rig.insert(frame, q, Vec3::new(v[0], v[1], v[2]));
        }
        Ok(rig)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# frame = x, y, z, qw, qx, qy, qz (pose relative to radar)\n");
        for (frame, pose) in &self.extrinsics {
            let t = pose.translation;
            let q = pose.rotation.coords();
            out.push_str(&format!(
                "{frame} = {}, {}, {}, {}, {}, {}, {}\n",
                t.x, t.y, t.z, q[0], q[1], q[2], q[3]
            ));
        }
        out
    }
}

pub(crate) fn parse_floats(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn frame(name: &str) -> FrameId {
        FrameId::new(name).unwrap()
    }

    fn pose(q: UnitQuaternion, t: [f64; 3], from: &str, to: &str) -> Pose {
        Pose::new(q, Vec3::from(t), frame(from), frame(to))
    }

    #[test]
    fn canonical_sign() {
        let q = UnitQuaternion::new(-1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q, UnitQuaternion::identity());
        let q = UnitQuaternion::new(0.0, 0.0, -2.0, 0.0).unwrap();
        assert_eq!(q.coords(), [0.0, 0.0, 1.0, 0.0]);
        assert!(UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn compose_identity_and_inverse() {
        let p = pose(UnitQuaternion::rot_z(0.3), [1.0, -2.0, 0.5], "a", "b");
        let id = Pose::identity(frame("a"));
        let c = id.compose(&p).unwrap();
        assert_eq!(c.distance(&p), (0.0, 0.0));
        let back = p.compose(&p.inverse()).unwrap();
        let (ang, dist) = back.distance(&Pose::identity(frame("a")));
        assert!(ang < 1e-12 && dist < 1e-12);
        assert_eq!(back.frame_to, frame("a"));
    }

    #[test]
    fn compose_quarter_turns() {
        // Hand-multiplied homogeneous matrices: Rz(90)|(1,0,0) * Rz(90)|0 = Rz(180)|(1,0,0).
        let a = pose(UnitQuaternion::rot_z(FRAC_PI_2), [1.0, 0.0, 0.0], "a", "b");
        let b = pose(UnitQuaternion::rot_z(FRAC_PI_2), [0.0, 0.0, 0.0], "b", "c");
        let c = a.compose(&b).unwrap();
        assert!(c.rotation.angle_to(&UnitQuaternion::rot_z(PI)) < 1e-12);
        assert_relative_eq!(c.translation, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn compose_rejects_broken_chain() {
        let a = pose(UnitQuaternion::identity(), [0.0; 3], "a", "b");
        let b = pose(UnitQuaternion::identity(), [0.0; 3], "c", "d");
        assert!(matches!(a.compose(&b), Err(Error::Frame(_))));
    }

    #[test]
    fn transform_point_cases() {
        let p = pose(UnitQuaternion::identity(), [0.0; 3], "a", "b");
        assert_eq!(p.transform_point(&Vec3::new(1.0, 2.0, 3.0)), Vec3::new(1.0, 2.0, 3.0));
        let p = pose(UnitQuaternion::rot_z(FRAC_PI_2), [0.0; 3], "a", "b");
        assert_relative_eq!(p.transform_point(&Vec3::x()), Vec3::y(), epsilon = 1e-15);
        let p = pose(UnitQuaternion::rot_z(FRAC_PI_4), [1.0, 0.0, 0.0], "a", "b");
        let h = 2f64.sqrt() / 2.0;
        assert_relative_eq!(
            p.transform_point(&Vec3::x()),
            Vec3::new(1.0 + h, h, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn matrix_round_trip() {
        let q = UnitQuaternion::from_axis_angle(Vec3::new(0.3, -1.0, 2.0), 2.9).unwrap();
        let back = UnitQuaternion::from_rotation_matrix(&q.rotation_matrix()).unwrap();
        assert!(q.angle_to(&back) < 1e-12);
        assert_relative_eq!(q.angle(), 2.9, epsilon = 1e-12);
    }

    #[test]
    fn rig_file_round_trip() {
        let mut rig = SensorRig::new();
        rig.insert(frame("lidar_left"), UnitQuaternion::rot_z(0.1), Vec3::new(0.0, 0.5, 0.3));
        let text = rig.to_text();
        let back = SensorRig::parse(&text, Path::new("rig.txt")).unwrap();
        assert_eq!(back, rig);
        assert!(SensorRig::parse("a = 1, 2", Path::new("x")).is_err());
        assert!(SensorRig::parse("a = 0,0,0,1,0,0,0\na = 0,0,0,1,0,0,0", Path::new("x")).is_err());
        assert!(back.extrinsic(&frame("nope")).is_err());
    }
}
