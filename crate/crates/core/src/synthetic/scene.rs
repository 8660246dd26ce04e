//! Extruded-footprint scene model and the ray kernel shared by all simulated
//! sensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Timestamp, Vec3};
use crate::taxonomy::{source, CITYSCAPES};

const EPS: f64 = 1e-9;

/// Plan-view footprint of an object, in its own frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// `length` along the heading `yaw`, `width` across it.
    Box {
        length: f64,
        width: f64,
        #[serde(default)]
        yaw: f64,
    },
    Cylinder { radius: f64 },
    /// Zero-thickness vertical panel.
    Billboard {
        length: f64,
        #[serde(default)]
        yaw: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    #[serde(flatten)]
    pub shape: Shape,
    /// Footprint centre at the scene epoch.
    pub centre: [f64; 2],
    /// Elevation of the bottom face.
    #[serde(default)]
    pub base: f64,
    pub height: f64,
    /// Source-taxonomy class.
    pub class: u8,
    /// Constant plan-view velocity, m/s.
    #[serde(default)]
    pub velocity: [f64; 2],
}

impl SceneObject {
    pub fn is_static(&self) -> bool {
        self.velocity == [0.0, 0.0]
    }

    fn validate(&self) -> Result<()> {
        let sizes: &[f64] = match &self.shape {
            Shape::Box { length, width, .. } => &[*length, *width],
            Shape::Cylinder { radius } => &[*radius],
            Shape::Billboard { length, .. } => &[*length],
        };
        let finite = self.centre.iter().chain(&self.velocity).chain([&self.base]).all(|v| v.is_finite());
        if !finite || !sizes.iter().chain([&self.height]).all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::invalid("scene object extents must be finite and positive"));
        }
        if self.class as usize >= CITYSCAPES.len() {
            return Err(Error::invalid(format!("scene object class {} is not a source class", self.class)));
        }
        Ok(())
    }

    fn footprint_at(&self, dt: f64) -> Footprint {
        let c = [self.centre[0] + self.velocity[0] * dt, self.centre[1] + self.velocity[1] * dt];
        match self.shape {
            Shape::Box { length, width, yaw } => Footprint::Box {
                c,
                half: [length / 2.0, width / 2.0],
                cos: yaw.cos(),
                sin: yaw.sin(),
            },
            Shape::Cylinder { radius } => Footprint::Disc { c, r: radius },
            Shape::Billboard { length, yaw } => {
                let h = [yaw.cos() * length / 2.0, yaw.sin() * length / 2.0];
                Footprint::Segment {
                    a: [c[0] - h[0], c[1] - h[1]],
                    b: [c[0] + h[0], c[1] + h[1]],
                }
            }
        }
    }
}

/// Objects over a ground plane at `z = 0`. Moving objects are at their
/// `centre` at `epoch`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub epoch: Timestamp,
    /// Class of the ground plane, if it is visible at all.
    pub ground_class: Option<u8>,
}

impl Scene {
    pub fn new(objects: Vec<SceneObject>, epoch: Timestamp) -> Result<Self> {
        for o in &objects {
            o.validate()?;
        }
        Ok(Scene {
            objects,
            epoch,
            ground_class: Some(source::ROAD),
        })
    }

    pub fn empty(epoch: Timestamp) -> Self {
        Scene {
            objects: Vec::new(),
            epoch,
            ground_class: None,
        }
    }

    /// Frozen geometry at time `t`.
    pub fn at(&self, t: Timestamp) -> Snapshot {
        let dt = t.since(self.epoch) as f64 * 1e-6;
        Snapshot {
            prisms: self
                .objects
                .iter()
                .enumerate()
                .map(|(i, o)| Prism {
                    footprint: o.footprint_at(dt),
                    z: (o.base, o.base + o.height),
                    class: o.class,
                    object: i,
                })
                .collect(),
            ground: self.ground_class,
        }
    }
}

type P2 = [f64; 2];

fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: P2) -> f64 {
    a[0].hypot(a[1])
}

pub(crate) fn segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let e = sub(b, a);
    let l2 = dot(e, e);
    let s = if l2 > 0.0 { (dot(sub(p, a), e) / l2).clamp(0.0, 1.0) } else { 0.0 };
    norm(sub(p, [a[0] + s * e[0], a[1] + s * e[1]]))
}

/// Footprint in some plan-view frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    Box { c: P2, half: P2, cos: f64, sin: f64 },
    Disc { c: P2, r: f64 },
    Segment { a: P2, b: P2 },
}

impl Footprint {
    /// Re-expressed in a frame whose origin sits at `origin` with heading
    /// `yaw`.
    pub fn to_frame(&self, origin: P2, yaw: f64) -> Footprint {
        let (s, c) = yaw.sin_cos();
        let tf = |p: P2| {
            let d = sub(p, origin);
            [c * d[0] + s * d[1], -s * d[0] + c * d[1]]
        };
        match *self {
            Footprint::Box { c: centre, half, cos, sin } => Footprint::Box {
                c: tf(centre),
                half,
                cos: cos * c + sin * s,
                sin: sin * c - cos * s,
            },
            Footprint::Disc { c: centre, r } => Footprint::Disc { c: tf(centre), r },
            Footprint::Segment { a, b } => Footprint::Segment { a: tf(a), b: tf(b) },
        }
    }

    pub(crate) fn vertices(&self) -> Vec<P2> {
        match *self {
            Footprint::Box { c, half, cos, sin } => [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
                .iter()
                .map(|(sx, sy)| {
                    let (lx, ly) = (sx * half[0], sy * half[1]);
                    [c[0] + cos * lx - sin * ly, c[1] + sin * lx + cos * ly]
                })
                .collect(),
            Footprint::Disc { .. } => Vec::new(),
            Footprint::Segment { a, b } => vec![a, b],
        }
    }

    pub fn contains(&self, p: P2) -> bool {
        match *self {
            Footprint::Box { c, half, cos, sin } => {
                let d = sub(p, c);
                (cos * d[0] + sin * d[1]).abs() <= half[0] + EPS && (-sin * d[0] + cos * d[1]).abs() <= half[1] + EPS
            }
            Footprint::Disc { c, r } => norm(sub(p, c)) <= r + EPS,
            Footprint::Segment { a, b } => segment_distance(p, a, b) <= EPS,
        }
    }

    /// Distance from `p` to the footprint; zero inside.
    pub fn distance(&self, p: P2) -> f64 {
        match *self {
            Footprint::Box { c, half, cos, sin } => {
                let d = sub(p, c);
                let l = [(cos * d[0] + sin * d[1]).abs() - half[0], (-sin * d[0] + cos * d[1]).abs() - half[1]];
                l[0].max(0.0).hypot(l[1].max(0.0))
            }
            Footprint::Disc { c, r } => (norm(sub(p, c)) - r).max(0.0),
            Footprint::Segment { a, b } => segment_distance(p, a, b),
        }
    }

    /// Parameter interval `[t_in, t_out]` over which the line `o + t d`
    /// lies inside the footprint.
    pub fn interval(&self, o: P2, d: P2) -> Option<(f64, f64)> {
        match *self {
            Footprint::Box { c, half, cos, sin } => {
                let p = sub(o, c);
                let lp = [cos * p[0] + sin * p[1], -sin * p[0] + cos * p[1]];
                let ld = [cos * d[0] + sin * d[1], -sin * d[0] + cos * d[1]];
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..2 {
                    if ld[i].abs() < 1e-15 {
                        if lp[i].abs() > half[i] {
                            return None;
                        }
                    } else {
                        let t1 = (-half[i] - lp[i]) / ld[i];
                        let t2 = (half[i] - lp[i]) / ld[i];
                        lo = lo.max(t1.min(t2));
                        hi = hi.min(t1.max(t2));
                    }
                }
                (lo <= hi).then_some((lo, hi))
            }
            Footprint::Disc { c, r } => {
                let p = sub(o, c);
                let a = dot(d, d);
                if a < 1e-30 {
                    return (dot(p, p) <= r * r).then_some((f64::NEG_INFINITY, f64::INFINITY));
                }
                let b = dot(p, d);
                let disc = b * b - a * (dot(p, p) - r * r);
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                Some(((-b - s) / a, (-b + s) / a))
            }
            Footprint::Segment { a, b } => {
                let e = sub(b, a);
                let denom = cross(d, e);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let w = sub(a, o);
                let t = cross(w, e) / denom;
                let s = cross(w, d) / denom;
                (-EPS..=1.0 + EPS).contains(&s).then_some((t, t))
            }
        }
    }

    /// Conservative `(range_min, range_max, bearing_min, bearing_max)` of the
    /// footprint seen from the origin, or `None` for the bearing span when
    /// the origin is inside it.
    pub fn polar_bounds(&self) -> (f64, f64, Option<(f64, f64)>) {
        let rmin = self.distance([0.0, 0.0]);
        let (rmax, reference, spread) = match *self {
            Footprint::Disc { c, r } => {
                let d = norm(c);
                (d + r, c, if d > r { Some((r / d).asin()) } else { None })
            }
            _ => {
                let v = self.vertices();
                let rmax = v.iter().map(|p| norm(*p)).fold(0.0, f64::max);
                let mid = [
                    v.iter().map(|p| p[0]).sum::<f64>() / v.len() as f64,
                    v.iter().map(|p| p[1]).sum::<f64>() / v.len() as f64,
                ];
                (rmax, mid, None)
            }
        };
        if rmin <= EPS {
            return (0.0, rmax, None);
        }
        let theta = reference[1].atan2(reference[0]);
        let span = match (self, spread) {
            (Footprint::Disc { .. }, Some(s)) => Some((theta - s, theta + s)),
            (Footprint::Disc { .. }, None) => None,
            _ => {
                let deltas = self.vertices().into_iter().map(|p| {
                    let d = p[1].atan2(p[0]) - theta;
                    (d + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
                });
                let (lo, hi) = deltas.fold((0.0f64, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
                Some((theta + lo, theta + hi))
            }
        };
        (rmin, rmax, span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prism {
    pub footprint: Footprint,
    pub z: (f64, f64),
    pub class: u8,
    /// Index of the scene object this prism came from.
    pub object: usize,
}

/// First surface along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub class: u8,
    /// Index into the scene's objects; `None` for the ground.
    pub object: Option<usize>,
}

/// Scene geometry frozen at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub prisms: Vec<Prism>,
    pub ground: Option<u8>,
}

impl Snapshot {
    /// Nearest surface along the unit-direction ray `origin + s dir`,
    /// `0 <= s <= max_distance`.
    pub fn first_hit(&self, origin: &Vec3, dir: &Vec3, max_distance: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let o = [origin.x, origin.y];
        let d = [dir.x, dir.y];
        for prism in &self.prisms {
            let Some((mut lo, mut hi)) = prism.footprint.interval(o, d) else {
                continue;
            };
            if dir.z.abs() < 1e-15 {
                if origin.z < prism.z.0 || origin.z > prism.z.1 {
                    continue;
                }
            } else {
                let t1 = (prism.z.0 - origin.z) / dir.z;
                let t2 = (prism.z.1 - origin.z) / dir.z;
                lo = lo.max(t1.min(t2));
                hi = hi.min(t1.max(t2));
            }
            let lo = lo.max(0.0);
            if lo <= hi && lo <= max_distance && best.is_none_or(|b| lo < b.distance) {
                best = Some(Hit {
                    distance: lo,
                    class: prism.class,
                    object: Some(prism.object),
                });
            }
        }
        if let Some(class) = self.ground {
            if dir.z < -1e-12 && origin.z > 0.0 {
                let s = -origin.z / dir.z;
                if s <= max_distance && best.is_none_or(|b| s < b.distance) {
                    best = Some(Hit {
                        distance: s,
                        class,
                        object: None,
                    });
                }
            }
        }
        best
    }

    /// The prisms that can be seen from `origin` within `max_distance`,
    /// and, when `view` is `(bearing, half_width)`, inside that plan-view
    /// wedge.
    pub fn cull(&self, origin: [f64; 2], max_distance: f64, view: Option<(f64, f64)>) -> Snapshot {
        let prisms = self
            .prisms
            .iter()
            .filter(|p| {
                let (rmin, _, span) = p.footprint.to_frame(origin, 0.0).polar_bounds();
                if rmin > max_distance {
                    return false;
                }
                match (view, span) {
                    (Some((centre, half)), Some((lo, hi))) => {
                        let mid = (lo + hi) / 2.0;
                        let gap = (mid - centre + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
                        gap.abs() <= half + (hi - lo) / 2.0
                    }
                    _ => true,
                }
            })
            .copied()
            .collect();
        Snapshot {
            prisms,
            ground: self.ground,
        }
    }

    /// Every footprint boundary crossing along a plan-view ray with unit
    /// direction `dir`, as `(distance, object)` sorted by distance.
    pub fn crossings(&self, origin: [f64; 2], dir: [f64; 2], max_distance: f64) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        for prism in &self.prisms {
            if let Some((lo, hi)) = prism.footprint.interval(origin, dir) {
                for s in if lo == hi { vec![lo] } else { vec![lo, hi] } {
                    if (0.0..max_distance).contains(&s) {
                        out.push((s, prism.object));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }
}
