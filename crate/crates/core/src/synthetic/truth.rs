//! Ground-truth radar label grids straight from scene geometry.

use ndarray::Array2;

use crate::geometry::{Pose, Timestamp};
use crate::grid::{GridGeometry, LabelGrid};
use crate::sensors::PolarGeometry;
use crate::taxonomy::{ClassMap, EMPTY};

use super::scene::{segment_distance, Footprint, Scene};

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Parameters `(t_in, t_out)` where the ray `t u`, `t >= 0`, is inside the
/// disc.
fn ray_disc(u: [f64; 2], c: [f64; 2], r: f64) -> Option<(f64, f64)> {
    let b = u[0] * c[0] + u[1] * c[1];
    let disc = b * b - (c[0] * c[0] + c[1] * c[1]) + r * r;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    (b + s >= 0.0).then(|| ((b - s).max(0.0), b + s))
}

/// Clips a convex polygon (or segment) to the half-plane `cross(u, p) * side >= 0`.
fn clip(poly: &[[f64; 2]], u: [f64; 2], side: f64) -> Vec<[f64; 2]> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    let f = |p: [f64; 2]| side * cross(u, p);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (fp, fq) = (f(p), f(q));
        if fp >= -1e-12 {
            out.push(p);
        }
        if (fp > 0.0 && fq < 0.0) || (fp < 0.0 && fq > 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Range interval the footprint covers inside the wedge of bearings
/// `[t0, t1]`, `t1 - t0 < pi`.
fn wedge_range(fp: &Footprint, t0: f64, t1: f64) -> Option<(f64, f64)> {
    let u0 = [t0.cos(), t0.sin()];
    let u1 = [t1.cos(), t1.sin()];
    match *fp {
        Footprint::Disc { c, r } => {
            let d = c[0].hypot(c[1]);
            let centre_inside = cross(u0, c) >= 0.0 && cross(u1, c) <= 0.0;
            let edges: Vec<(f64, f64)> = [u0, u1].iter().filter_map(|u| ray_disc(*u, c, r)).collect();
            let (mut lo, mut hi) = if centre_inside || d <= r {
                ((d - r).max(0.0), d + r)
            } else {
                (f64::INFINITY, f64::NEG_INFINITY)
            };
            if !centre_inside {
                hi = edges.iter().map(|e| e.1).fold(if d <= r { 0.0 } else { hi }, f64::max);
                if d > r {
                    lo = edges.iter().map(|e| e.0).fold(lo, f64::min);
                }
            }
            (lo <= hi).then_some((lo, hi))
        }
        _ => {
            let poly = clip(&clip(&fp.vertices(), u0, 1.0), u1, -1.0);
            if poly.is_empty() {
                return None;
            }
            let hi = poly.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
            let lo = if fp.contains([0.0, 0.0]) {
                0.0
            } else {
                let n = poly.len();
                (0..n).map(|i| segment_distance([0.0, 0.0], poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            };
            Some((lo, hi))
        }
    }
}

/// Calls `f(a, r)` for every cell of `geom` that the footprint touches.
fn for_each_overlap(fp: &Footprint, geom: &PolarGeometry, mut f: impl FnMut(usize, usize)) {
    let (rmin, _, span) = fp.polar_bounds();
    if rmin >= geom.max_range() {
        return;
    }
    let na = geom.azimuths as i64;
    let step = geom.azimuth_step();
    let (a_lo, a_hi) = match span {
        Some((lo, hi)) => ((lo / step).floor() as i64 - 1, (hi / step).floor() as i64 + 1),
        None => (0, na - 1),
    };
    let (a_lo, a_hi) = if a_hi - a_lo + 1 >= na { (0, na - 1) } else { (a_lo, a_hi) };
    for k in a_lo..=a_hi {
        let a = k.rem_euclid(na) as usize;
        let Some((lo, hi)) = wedge_range(fp, a as f64 * step, (a + 1) as f64 * step) else {
            continue;
        };
        if lo >= geom.max_range() {
            continue;
        }
        let r_hi = ((hi / geom.range_resolution) as usize).min(geom.range_bins - 1);
        for r in (lo / geom.range_resolution) as usize..=r_hi {
            f(a, r);
        }
    }
}

/// Footprints of `scene` at `t` in the plan-view frame of `pose` (radar to
/// world), paired with their target class. Objects mapping to Empty are
/// dropped.
fn radar_footprints(scene: &Scene, pose: &Pose, t: Timestamp, class_map: &ClassMap) -> Vec<(Footprint, u8)> {
    let origin = [pose.translation.x, pose.translation.y];
    let yaw = pose.rotation.yaw();
    scene
        .at(t)
        .prisms
        .iter()
        .filter_map(|p| {
            let target = class_map.map(p.class).filter(|c| *c != EMPTY)?;
            Some((p.footprint.to_frame(origin, yaw), target))
        })
        .collect()
}

/// Target-class grid of everything occupying each cell at time `t`. Where
/// several objects share a cell, the one closest to the radar claims it.
pub fn ground_truth_grid(
    scene: &Scene,
    pose: &Pose,
    t: Timestamp,
    geom: &PolarGeometry,
    class_map: &ClassMap,
) -> LabelGrid {
    let mut labels = Array2::from_elem((geom.azimuths, geom.range_bins), EMPTY);
    let mut nearest = Array2::from_elem((geom.azimuths, geom.range_bins), f64::INFINITY);
    for (fp, class) in radar_footprints(scene, pose, t, class_map) {
        let d = fp.distance([0.0, 0.0]);
        for_each_overlap(&fp, geom, |a, r| {
            if d < nearest[[a, r]] {
                nearest[[a, r]] = d;
                labels[[a, r]] = class;
            }
        });
    }
    LabelGrid {
        labels,
        geometry: GridGeometry::Polar(*geom),
        time: t,
    }
}

/// Bitmask of every target class touching each cell (bit `c` for class `c`).
pub fn ground_truth_classes(
    scene: &Scene,
    pose: &Pose,
    t: Timestamp,
    geom: &PolarGeometry,
    class_map: &ClassMap,
) -> Array2<u64> {
    let mut masks = Array2::zeros((geom.azimuths, geom.range_bins));
    for (fp, class) in radar_footprints(scene, pose, t, class_map) {
        for_each_overlap(&fp, geom, |a, r| masks[[a, r]] |= 1u64 << class);
    }
    masks
}
