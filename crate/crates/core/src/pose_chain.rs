//! Time-indexed vehicle trajectory with interpolated pose queries.
//!
//! Rotation is interpolated with SLERP along the shorter arc and translation
//! at constant velocity, independently of each other.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{FrameId, Pose, Timestamp, UnitQuaternion, Vec3};

/// Below this `sin(theta)` the two quaternions are treated as parallel and
/// blended linearly.
const PARALLEL_SIN_THRESHOLD: f64 = 1e-6;

/// Spherical linear interpolation from `q0` (alpha = 0) to `q1` (alpha = 1)
/// along the shorter great-circle arc.
pub fn slerp(q0: &UnitQuaternion, q1: &UnitQuaternion, alpha: f64) -> UnitQuaternion {
    let a = q0.coords();
    let mut b = q1.coords();
    if q0.dot(q1) < 0.0 {
        b.iter_mut().for_each(|c| *c = -*c);
    }
    // Half the angle between the hyperspherical points, computed from chord
    // lengths so it stays accurate near 0 and near pi.
    let diff: f64 = (0..4).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
    let sum: f64 = (0..4).map(|i| (a[i] + b[i]).powi(2)).sum::<f64>().sqrt();
    let theta = 2.0 * diff.atan2(sum);
    let sin_theta = theta.sin();

    let (s0, s1) = if sin_theta < PARALLEL_SIN_THRESHOLD {
        (1.0 - alpha, alpha)
    } else {
        (
            ((1.0 - alpha) * theta).sin() / sin_theta,
            (alpha * theta).sin() / sin_theta,
        )
    };
    UnitQuaternion::normalized_unchecked(
        s0 * a[0] + s1 * b[0],
        s0 * a[1] + s1 * b[1],
        s0 * a[2] + s1 * b[2],
        s0 * a[3] + s1 * b[3],
    )
}

/// Ordered `world -> body` poses with strictly increasing timestamps.
#[derive(Debug, Clone)]
pub struct PoseChain {
    times: Vec<Timestamp>,
    poses: Vec<Pose>,
}

impl PoseChain {
    pub fn new(entries: Vec<(Timestamp, Pose)>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::invalid("pose chain needs at least two entries"));
        }
        let body = entries[0].1.frame_to.clone();
        for (i, (t, pose)) in entries.iter().enumerate() {
            if pose.frame_from.as_str() != crate::geometry::WORLD_FRAME {
                return Err(Error::Frame(format!(
                    "pose chain entry {i} is expressed in {} rather than world",
                    pose.frame_from
                )));
            }
            if pose.frame_to != body {
                return Err(Error::Frame(format!(
                    "pose chain entry {i} locates {} rather than {body}",
                    pose.frame_to
                )));
            }
            if i > 0 && *t <= entries[i - 1].0 {
                return Err(Error::invalid(format!(
                    "pose chain timestamps not strictly increasing at entry {i}"
                )));
            }
        }
        let (times, poses) = entries.into_iter().unzip();
        Ok(PoseChain { times, poses })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> Timestamp {
        self.times[0]
    }

    pub fn end(&self) -> Timestamp {
        self.times[self.times.len() - 1]
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start() <= t && t <= self.end()
    }

    pub fn body_frame(&self) -> &FrameId {
        &self.poses[0].frame_to
    }

    pub fn entries(&self) -> impl Iterator<Item = (Timestamp, &Pose)> {
        self.times.iter().copied().zip(self.poses.iter())
    }

    fn out_of_range(&self, t: Timestamp) -> Error {
        Error::OutOfRange {
            t,
            start: self.start(),
            end: self.end(),
        }
    }

    /// `world -> body` pose at `t`. No extrapolation past either end.
    pub fn interpolate(&self, t: Timestamp) -> Result<Pose> {
        if !self.contains(t) {
            return Err(self.out_of_range(t));
        }
        // First index with time > t; t >= start so idx >= 1.
        let idx = self.times.partition_point(|ti| *ti <= t);
        let lo = idx - 1;
        if self.times[lo] == t {
            return Ok(self.poses[lo].clone());
        }
        let (t0, t1) = (self.times[lo], self.times[idx]);
        let (p0, p1) = (&self.poses[lo], &self.poses[idx]);
        let alpha = (t - t0) as f64 / (t1 - t0) as f64;
        Ok(Pose::new(
            slerp(&p0.rotation, &p1.rotation, alpha),
            p0.translation + alpha * (p1.translation - p0.translation),
            p0.frame_from.clone(),
            p0.frame_to.clone(),
        ))
    }

    /// Pose of the body at `t_b` expressed in the body frame at `t_a`:
    /// maps points sensed at `t_b` into body coordinates at `t_a`.
    pub fn relative_pose(&self, t_a: Timestamp, t_b: Timestamp) -> Result<Pose> {
        let pa = self.interpolate(t_a)?;
        if t_a == t_b {
            return Ok(Pose::identity(pa.frame_to));
        }
        let pb = self.interpolate(t_b)?;
        pa.inverse().compose(&pb)
    }

    /// Reads `timestamp_us,x,y,z,qw,qx,qy,qz` rows; a header row is optional.
    pub fn load(path: &Path, body: FrameId) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::format(path, e))?;
        let mut entries = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::format(path, e))?;
            if row == 0 && record.get(0) == Some("timestamp_us") {
                continue;
            }
            let err = |msg: String| Error::format(path, format!("row {}: {msg}", row + 1));
            if record.len() != 8 {
                return Err(err(format!("expected 8 columns, got {}", record.len())));
            }
            let t: i64 = record[0]
                .parse()
                .map_err(|e| err(format!("bad timestamp: {e}")))?;
            let v: Vec<f64> = (1..8)
                .map(|i| record[i].parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(format!("bad number: {e}")))?;
            let q = UnitQuaternion::new(v[3], v[4], v[5], v[6]).map_err(|e| err(e.to_string()))?;
            entries.push((
                Timestamp(t),
                Pose::new(q, Vec3::new(v[0], v[1], v[2]), FrameId::world(), body.clone()),
            ));
        }
        PoseChain::new(entries).map_err(|e| Error::format(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("timestamp_us,x,y,z,qw,qx,qy,qz\n");
        for (t, pose) in self.entries() {
            let p = pose.translation;
            let q = pose.rotation.coords();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t.0, p.x, p.y, p.z, q[0], q[1], q[2], q[3]
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}
