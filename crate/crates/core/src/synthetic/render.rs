//! Camera, LiDAR and radar samplers over a [`Scene`].

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Timestamp, Vec3};
use crate::projection::item_seed;
use crate::sensors::{CameraModel, LidarScan, PolarGeometry, RadarScan, SemanticImage};
use crate::taxonomy::source;

use super::scene::Scene;

/// Class given to pixels whose ray leaves the scene.
pub const BACKGROUND: u8 = source::SKY;

/// Class mask seen by `camera` posed at `pose` (camera to world).
///
/// `dilation_px > 0` emulates a weaker segmenter: every pixel takes the
/// class of the nearest surface within that many pixels, so foreground
/// objects bleed over their silhouettes.
pub fn render_semantic_image(
    scene: &Scene,
    camera: &CameraModel,
    pose: &Pose,
    t: Timestamp,
    dilation_px: usize,
) -> SemanticImage {
    let (w, h) = (camera.width, camera.height);
    let origin = pose.translation;
    let snap = scene.at(t).cull([origin.x, origin.y], f64::INFINITY, view_wedge(camera, pose));
    let pixels: Vec<(u8, f64)> = (0..h)
        .into_par_iter()
        .flat_map_iter(|v| {
            let snap = &snap;
            (0..w).map(move |u| {
                let dir = pose.rotation.rotate(&camera.ray(u as f64 + 0.5, v as f64 + 0.5).normalize());
                match snap.first_hit(&origin, &dir, f64::INFINITY) {
                    Some(hit) => (hit.class, hit.distance),
                    None => (BACKGROUND, f64::INFINITY),
                }
            })
        })
        .collect();
    let labels = Array2::from_shape_fn((h, w), |(v, u)| pixels[v * w + u].0);
    let labels = if dilation_px == 0 {
        labels
    } else {
        let depth = Array2::from_shape_fn((h, w), |(v, u)| pixels[v * w + u].1);
        dilate_nearest(&labels, &depth, dilation_px)
    };
    SemanticImage::new(labels, camera.clone(), t).expect("rendered image matches its camera")
}

/// Plan-view `(bearing, half_width)` containing every pixel ray, or `None`
/// when the camera looks too steeply for a wedge to bound it.
fn view_wedge(camera: &CameraModel, pose: &Pose) -> Option<(f64, f64)> {
    let (w, h) = (camera.width as f64, camera.height as f64);
    let mut bearings = Vec::new();
    for (u, v) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h), (w / 2.0, 0.0), (w / 2.0, h), (0.0, h / 2.0), (w, h / 2.0)] {
        let d = pose.rotation.rotate(&camera.ray(u, v));
        if d.x.hypot(d.y) < 0.2 * d.norm() {
            return None;
        }
        bearings.push(d.y.atan2(d.x));
    }
    let centre = {
        let d = pose.rotation.rotate(&camera.ray(w / 2.0, h / 2.0));
        d.y.atan2(d.x)
    };
    let half = bearings
        .iter()
        .map(|b| ((b - centre + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI).abs())
        .fold(0.0, f64::max);
    // Straight edges of the image bow outwards in plan view when pitched.
    (half < 1.4).then_some((centre, half + 0.05))
}

fn dilate_nearest(labels: &Array2<u8>, depth: &Array2<f64>, k: usize) -> Array2<u8> {
    let (h, w) = labels.dim();
    Array2::from_shape_fn((h, w), |(v, u)| {
        let mut best = (depth[[v, u]], labels[[v, u]]);
        for vv in v.saturating_sub(k)..(v + k + 1).min(h) {
            for uu in u.saturating_sub(k)..(u + k + 1).min(w) {
                if depth[[vv, uu]] < best.0 {
                    best = (depth[[vv, uu]], labels[[vv, uu]]);
                }
            }
        }
        best.1
    })
}

/// Rings of beams at fixed elevations, each swept over the full circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamPattern {
    pub rings: usize,
    pub min_elevation_deg: f64,
    pub max_elevation_deg: f64,
    pub azimuth_steps: usize,
    pub max_range: f64,
}

impl Default for BeamPattern {
    fn default() -> Self {
        BeamPattern {
            rings: 16,
            min_elevation_deg: -15.0,
            max_elevation_deg: 15.0,
            azimuth_steps: 360,
            max_range: 50.0,
        }
    }
}

impl BeamPattern {
    /// Unit beam directions in the sensor frame, ring-major.
    pub fn directions(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.rings * self.azimuth_steps);
        for ring in 0..self.rings {
            let frac = if self.rings > 1 { ring as f64 / (self.rings - 1) as f64 } else { 0.0 };
            let el = (self.min_elevation_deg + frac * (self.max_elevation_deg - self.min_elevation_deg)).to_radians();
            for step in 0..self.azimuth_steps {
                let az = std::f64::consts::TAU * step as f64 / self.azimuth_steps as f64;
                out.push(Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        out
    }
}

/// A simulated scan with the true class and object behind every point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedLidar {
    pub scan: LidarScan,
    pub classes: Vec<u8>,
    pub objects: Vec<Option<usize>>,
}

/// Nearest returns of every beam within `pattern.max_range`, in the sensor
/// frame of `pose` (sensor to world).
pub fn simulate_lidar(scene: &Scene, pose: &Pose, t: Timestamp, pattern: &BeamPattern, rate_hz: f64) -> SimulatedLidar {
    let snap = scene.at(t).cull([pose.translation.x, pose.translation.y], pattern.max_range, None);
    let hits: Vec<(Vec3, u8, Option<usize>)> = pattern
        .directions()
        .into_par_iter()
        .filter_map(|d| {
            let hit = snap.first_hit(&pose.translation, &pose.rotation.rotate(&d), pattern.max_range)?;
            Some((d * hit.distance, hit.class, hit.object))
        })
        .collect();
    let mut points = Vec::with_capacity(hits.len());
    let mut classes = Vec::with_capacity(hits.len());
    let mut objects = Vec::with_capacity(hits.len());
    for (p, c, o) in hits {
        points.push(p);
        classes.push(c);
        objects.push(o);
    }
    SimulatedLidar {
        scan: LidarScan::new(points, pose.frame_to.clone(), t, rate_hz).expect("ray hits are finite"),
        classes,
        objects,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarOptions {
    pub geometry: PolarGeometry,
    /// Rays spread evenly across each azimuth bin.
    pub rays_per_azimuth: usize,
    /// Mean of the additive exponential speckle; zero disables it.
    pub speckle: f32,
    pub rate_hz: f64,
}

impl Default for RadarOptions {
    fn default() -> Self {
        RadarOptions {
            geometry: PolarGeometry::default(),
            rays_per_azimuth: 4,
            speckle: 0.0,
            rate_hz: 4.0,
        }
    }
}

/// Planar scan at `pose` (radar to world). Every footprint boundary a ray
/// crosses deposits `1 / rays_per_azimuth` in its range bin, so objects
/// behind one another all return.
pub fn simulate_radar(scene: &Scene, pose: &Pose, t: Timestamp, opts: &RadarOptions, seed: u64) -> RadarScan {
    let geom = opts.geometry;
    let origin = [pose.translation.x, pose.translation.y];
    let snap = scene.at(t).cull(origin, geom.max_range(), None);
    let n = opts.rays_per_azimuth.max(1);
    let rows: Vec<Vec<f32>> = (0..geom.azimuths)
        .into_par_iter()
        .map(|a| {
            let mut row = vec![0.0f32; geom.range_bins];
            for k in 0..n {
                let bearing = (a as f64 + (k as f64 + 0.5) / n as f64) * geom.azimuth_step();
                let d = pose.rotation.rotate(&Vec3::new(bearing.cos(), bearing.sin(), 0.0));
                let len = d.x.hypot(d.y);
                if len < 1e-12 {
                    continue;
                }
                for (s, _) in snap.crossings(origin, [d.x / len, d.y / len], geom.max_range()) {
                    let r = ((s / geom.range_resolution) as usize).min(geom.range_bins - 1);
                    row[r] += 1.0 / n as f32;
                }
            }
            row
        })
        .collect();
    let mut power = Array2::from_shape_fn((geom.azimuths, geom.range_bins), |(a, r)| rows[a][r]);
    if opts.speckle > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(item_seed(seed, t));
        for v in power.iter_mut() {
            let u: f64 = rng.random();
            *v += opts.speckle * (-(1.0 - u).ln()) as f32;
        }
    }
    let period = 1e6 / opts.rate_hz;
    let azimuth_times = (0..geom.azimuths)
        .map(|a| t.offset((((a as f64 + 0.5) / geom.azimuths as f64 - 0.5) * period).round() as i64))
        .collect();
    RadarScan::new(
        power,
        azimuth_times,
        geom.range_resolution,
        pose.frame_to.clone(),
        t,
        opts.rate_hz,
    )
    .expect("simulated scan is consistent")
}
