//! Scenario configuration, ego trajectories, the simulated rig and on-disk
//! recording generation.

use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::manifest::{Manifest, SensorEntry};
use crate::error::{Error, Result};
use crate::formats;
use crate::geometry::{FrameId, Pose, SensorRig, Timestamp, UnitQuaternion, Vec3};
use crate::pose_chain::PoseChain;
use crate::sensors::{CameraModel, PolarGeometry};
use crate::taxonomy::{default_class_map, source};

use super::render::{render_semantic_image, simulate_lidar, simulate_radar, BeamPattern, RadarOptions};
use super::scene::{Scene, SceneObject, Shape};
use super::truth::ground_truth_grid;

/// Start of every simulated recording, in microseconds.
pub const EPOCH: Timestamp = Timestamp(1_547_120_000_000_000);

/// Pose chain sampling rate.
pub const CHAIN_RATE_HZ: f64 = 100.0;

pub const CAMERA_FRAMES: [&str; 4] = ["cam_front", "cam_left", "cam_rear", "cam_right"];
pub const LIDAR_FRAMES: [&str; 2] = ["lidar_left", "lidar_right"];

fn default_height() -> f64 {
    1.8
}

/// Piecewise-linear ego path driven at a constant speed per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub waypoints: Vec<[f64; 2]>,
    /// One speed per segment, m/s.
    #[serde(default)]
    pub speeds: Vec<f64>,
    /// Height of the radar above the ground.
    #[serde(default = "default_height")]
    pub height: f64,
    /// Length of a stationary (single-waypoint) recording.
    #[serde(default)]
    pub duration_secs: Option<f64>,
    /// Heading of a stationary recording.
    #[serde(default)]
    pub heading: f64,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        let finite = self.waypoints.iter().flatten().chain([&self.height, &self.heading]).all(|v| v.is_finite());
        if self.waypoints.is_empty() || !finite {
            return Err(Error::invalid("trajectory needs finite waypoints"));
        }
        if self.waypoints.len() == 1 {
            if !self.duration_secs.is_some_and(|d| d > 0.0 && d.is_finite()) {
                return Err(Error::invalid("a stationary trajectory needs a positive duration_secs"));
            }
            return Ok(());
        }
        if self.speeds.len() != self.waypoints.len() - 1 {
            return Err(Error::invalid("trajectory needs one speed per segment"));
        }
        if !self.speeds.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::invalid("segment speeds must be positive"));
        }
        if self.waypoints.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("consecutive waypoints coincide"));
        }
        Ok(())
    }

    fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2], f64)> + '_ {
        self.waypoints.windows(2).zip(&self.speeds).map(|(w, s)| {
            let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            (w[0], w[1], len / s)
        })
    }

    pub fn duration_secs(&self) -> f64 {
        match self.waypoints.len() {
            1 => self.duration_secs.unwrap_or(0.0),
            _ => self.segments().map(|s| s.2).sum(),
        }
    }

    /// `(x, y, yaw)` `secs` after the start, clamped to the path.
    pub fn state_at(&self, secs: f64) -> (f64, f64, f64) {
        if self.waypoints.len() == 1 {
            let p = self.waypoints[0];
            return (p[0], p[1], self.heading);
        }
        let mut remaining = secs.max(0.0);
        let mut last = None;
        for (a, b, dur) in self.segments() {
            let yaw = (b[1] - a[1]).atan2(b[0] - a[0]);
            if remaining < dur {
                let f = remaining / dur;
                return (a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), yaw);
            }
            remaining -= dur;
            last = Some((b[0], b[1], yaw));
        }
        last.expect("validated trajectory has a segment")
    }

    /// Body poses sampled at [`CHAIN_RATE_HZ`] from `start`, plus the end.
    pub fn to_chain(&self, start: Timestamp) -> Result<PoseChain> {
        self.validate()?;
        let end_us = (self.duration_secs() * 1e6).round() as i64;
        let step = (1e6 / CHAIN_RATE_HZ) as i64;
        let mut times: Vec<i64> = (0..).map(|k| k * step).take_while(|t| *t < end_us).collect();
        times.push(end_us);
        let entries = times
            .into_iter()
            .map(|us| {
                let (x, y, yaw) = self.state_at(us as f64 * 1e-6);
                let pose = Pose::new(
                    UnitQuaternion::rot_z(yaw),
                    Vec3::new(x, y, self.height),
                    FrameId::world(),
                    FrameId::radar(),
                );
                (start.offset(us), pose)
            })
            .collect();
        PoseChain::new(entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
    pub rate_hz: f64,
    /// Offset of the first frame from the recording start.
    pub phase_ms: f64,
    /// Extra offset added per camera, so the four cameras are not in sync.
    pub stagger_ms: f64,
    pub dilation_px: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            width: 128,
            height: 96,
            fov_deg: 90.0,
            rate_hz: 25.0,
            phase_ms: 0.0,
            stagger_ms: 10.0,
            dilation_px: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarConfig {
    pub rings: usize,
    pub min_elevation_deg: f64,
    pub max_elevation_deg: f64,
    pub azimuth_steps: usize,
    pub max_range: f64,
    pub rate_hz: f64,
    pub phase_ms: f64,
    pub stagger_ms: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        let p = BeamPattern::default();
        LidarConfig {
            rings: p.rings,
            min_elevation_deg: p.min_elevation_deg,
            max_elevation_deg: p.max_elevation_deg,
            azimuth_steps: p.azimuth_steps,
            max_range: p.max_range,
            rate_hz: 20.0,
            phase_ms: 5.0,
            stagger_ms: 25.0,
        }
    }
}

impl LidarConfig {
    pub fn pattern(&self) -> BeamPattern {
        BeamPattern {
            rings: self.rings,
            min_elevation_deg: self.min_elevation_deg,
            max_elevation_deg: self.max_elevation_deg,
            azimuth_steps: self.azimuth_steps,
            max_range: self.max_range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarConfig {
    pub azimuths: usize,
    pub range_bins: usize,
    pub range_resolution: f64,
    pub rays_per_azimuth: usize,
    pub speckle: f32,
    pub rate_hz: f64,
    pub phase_ms: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            azimuths: 400,
            range_bins: 400,
            range_resolution: 0.25,
            rays_per_azimuth: 4,
            speckle: 0.0,
            rate_hz: 4.0,
            phase_ms: 12.0,
        }
    }
}

impl RadarConfig {
    pub fn options(&self) -> Result<RadarOptions> {
        Ok(RadarOptions {
            geometry: PolarGeometry::new(self.azimuths, self.range_bins, self.range_resolution)?,
            rays_per_azimuth: self.rays_per_azimuth,
            speckle: self.speckle,
            rate_hz: self.rate_hz,
        })
    }
}

/// Declarative description of a simulated recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub lidar: LidarConfig,
    #[serde(default)]
    pub radar: RadarConfig,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

impl ScenarioConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.trajectory.validate().map_err(|e| Error::format(path, e))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serialises")
    }

    /// A named built-in scenario: `corridor`, `boundary_heavy` or
    /// `open_road`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "corridor" => Ok(corridor(seed)),
            "boundary_heavy" => Ok(boundary_heavy(seed)),
            "open_road" => Ok(open_road(seed)),
            other => Err(Error::invalid(format!("unknown scenario preset `{other}`"))),
        }
    }

    pub fn scene(&self) -> Result<Scene> {
        Scene::new(self.objects.clone(), EPOCH)
    }

    pub fn chain(&self) -> Result<PoseChain> {
        self.trajectory.to_chain(EPOCH)
    }

    pub fn cameras(&self) -> Result<Vec<CameraModel>> {
        let c = &self.camera;
        let f = (c.width as f64 / 2.0) / (c.fov_deg.to_radians() / 2.0).tan();
        CAMERA_FRAMES
            .iter()
            .map(|name| {
                CameraModel::new(
                    f,
                    f,
                    c.width as f64 / 2.0,
                    c.height as f64 / 2.0,
                    c.width,
                    c.height,
                    FrameId::new(name)?,
                    c.rate_hz,
                )
            })
            .collect()
    }

    /// Timestamps of a sensor running at `rate_hz` from `phase_ms` after the
    /// start, up to the end of the trajectory.
    fn ticks(&self, rate_hz: f64, phase_ms: f64) -> Vec<Timestamp> {
        let end = EPOCH.offset((self.trajectory.duration_secs() * 1e6).round() as i64);
        let period = (1e6 / rate_hz).round() as i64;
        let first = EPOCH.offset((phase_ms * 1e3).round() as i64);
        (0..).map(|k| first.offset(k * period)).take_while(|t| *t <= end).collect()
    }
}

/// Radar at the body origin, two roof LiDARs either side and four level
/// cameras facing ahead, left, behind and right.
pub fn simulated_rig() -> SensorRig {
    let mut rig = SensorRig::new();
    rig.insert(FrameId::new(LIDAR_FRAMES[0]).unwrap(), UnitQuaternion::identity(), Vec3::new(0.0, 0.5, 0.3));
    rig.insert(FrameId::new(LIDAR_FRAMES[1]).unwrap(), UnitQuaternion::identity(), Vec3::new(0.0, -0.5, 0.3));
    // Optical axes: x right, y down, z forward.
    let optical = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    let forward = UnitQuaternion::from_rotation_matrix(&optical).unwrap();
    for (k, name) in CAMERA_FRAMES.iter().enumerate() {
        let yaw = k as f64 * std::f64::consts::FRAC_PI_2;
        let q = UnitQuaternion::rot_z(yaw).mul(&forward);
        let t = Vec3::new(0.3 * yaw.cos(), 0.3 * yaw.sin(), 0.2);
        rig.insert(FrameId::new(name).unwrap(), q, t);
    }
    rig
}

fn obj(shape: Shape, centre: [f64; 2], height: f64, class: u8) -> SceneObject {
    SceneObject {
        shape,
        centre,
        base: 0.0,
        height,
        class,
        velocity: [0.0, 0.0],
    }
}

/// Buildings along both sides of a straight street from `x0` to `x1`, set
/// back `setback` metres, with randomised frontages and gaps.
fn street_frontage(rng: &mut ChaCha8Rng, x0: f64, x1: f64, setback: f64, out: &mut Vec<SceneObject>) {
    for side in [-1.0, 1.0] {
        let mut x = x0;
        while x < x1 {
            let len = rng.random_range(10.0..25.0);
            let depth = rng.random_range(8.0..14.0);
            let class = if rng.random_bool(0.15) { source::WALL } else { source::BUILDING };
            out.push(obj(
                Shape::Box { length: len, width: depth, yaw: 0.0 },
                [x + len / 2.0, side * (setback + depth / 2.0)],
                rng.random_range(6.0..18.0),
                class,
            ));
            x += len + rng.random_range(2.0..6.0);
        }
    }
}

/// Sidewalk furniture: poles, trees, parked cars, pedestrians and bikes.
fn street_furniture(rng: &mut ChaCha8Rng, x0: f64, x1: f64, kerb: f64, out: &mut Vec<SceneObject>) {
    for side in [-1.0, 1.0] {
        let mut x = x0 + rng.random_range(0.0..5.0);
        while x < x1 {
            let y = side * (kerb + rng.random_range(0.5..2.0));
            let pick: f64 = rng.random();
            let o = if pick < 0.25 {
                obj(Shape::Cylinder { radius: 0.15 }, [x, y], 5.0, source::POLE)
            } else if pick < 0.45 {
                obj(Shape::Cylinder { radius: rng.random_range(0.6..1.2) }, [x, y], 5.0, source::VEGETATION)
            } else if pick < 0.75 {
                let ys = side * (kerb - 1.2);
                obj(Shape::Box { length: 4.5, width: 1.8, yaw: 0.0 }, [x, ys], 1.5, source::CAR)
            } else if pick < 0.9 {
                obj(Shape::Cylinder { radius: 0.3 }, [x, y], 1.8, source::PERSON)
            } else {
                obj(Shape::Box { length: 1.8, width: 0.5, yaw: 0.0 }, [x, y], 1.2, source::BICYCLE)
            };
            out.push(o);
            x += rng.random_range(6.0..14.0);
        }
    }
}

fn corridor(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects = Vec::new();
    street_frontage(&mut rng, -40.0, 140.0, 9.0, &mut objects);
    street_furniture(&mut rng, -20.0, 120.0, 6.0, &mut objects);
    objects.push(obj(Shape::Billboard { length: 2.0, yaw: std::f64::consts::FRAC_PI_2 }, [60.0, 6.5], 1.0, source::TRAFFIC_SIGN));
    objects.last_mut().unwrap().base = 2.0;
    // Oncoming traffic.
    let mut bus = obj(Shape::Box { length: 11.0, width: 2.5, yaw: 0.0 }, [110.0, -2.5], 3.0, source::BUS);
    bus.velocity = [-5.0, 0.0];
    objects.push(bus);
    ScenarioConfig {
        name: "corridor".into(),
        seed,
        trajectory: Trajectory {
            waypoints: vec![[0.0, 0.0], [100.0, 0.0]],
            speeds: vec![8.0],
            height: default_height(),
            duration_secs: None,
            heading: 0.0,
        },
        camera: CameraConfig::default(),
        lidar: LidarConfig::default(),
        radar: RadarConfig::default(),
        objects,
    }
}

fn boundary_heavy(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects = Vec::new();
    for side in [-1.0, 1.0] {
        let mut x = -10.0;
        while x < 120.0 {
            let y = side * rng.random_range(4.0..9.0);
            let o = match rng.random_range(0..4) {
                0 => obj(Shape::Cylinder { radius: 0.15 }, [x, y], 4.0, source::POLE),
                1 => obj(Shape::Cylinder { radius: 0.3 }, [x, y], 1.8, source::PERSON),
                2 => obj(Shape::Box { length: 1.8, width: 0.5, yaw: rng.random_range(-0.5..0.5) }, [x, y], 1.2, source::BICYCLE),
                _ => obj(Shape::Box { length: 4.5, width: 1.8, yaw: 0.0 }, [x, y], 1.5, source::CAR),
            };
            objects.push(o);
            x += rng.random_range(2.0..5.0);
        }
        objects.push(obj(
            Shape::Box { length: 160.0, width: 2.0, yaw: 0.0 },
            [55.0, side * 14.0],
            8.0,
            source::BUILDING,
        ));
    }
    ScenarioConfig {
        name: "boundary_heavy".into(),
        seed,
        trajectory: Trajectory {
            waypoints: vec![[0.0, 0.0], [100.0, 0.0]],
            speeds: vec![10.0],
            height: default_height(),
            duration_secs: None,
            heading: 0.0,
        },
        camera: CameraConfig::default(),
        lidar: LidarConfig::default(),
        radar: RadarConfig::default(),
        objects,
    }
}

fn open_road(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects = Vec::new();
    for side in [-1.0, 1.0] {
        let mut x = -120.0;
        while x < 420.0 {
            let y = side * rng.random_range(6.0..20.0);
            let o = match rng.random_range(0..4) {
                0 => obj(Shape::Cylinder { radius: 0.2 }, [x, y], 6.0, source::POLE),
                1 => obj(Shape::Cylinder { radius: rng.random_range(0.8..1.5) }, [x, y], 6.0, source::VEGETATION),
                2 => obj(Shape::Box { length: 4.5, width: 1.8, yaw: 0.0 }, [x, y], 1.5, source::CAR),
                _ => obj(Shape::Box { length: 6.0, width: 0.4, yaw: 0.0 }, [x, y], 2.0, source::FENCE),
            };
            objects.push(o);
            x += rng.random_range(8.0..20.0);
        }
    }
    ScenarioConfig {
        name: "open_road".into(),
        seed,
        trajectory: Trajectory {
            waypoints: vec![[0.0, 0.0], [300.0, 0.0]],
            speeds: vec![12.0],
            height: default_height(),
            duration_secs: None,
            heading: 0.0,
        },
        camera: CameraConfig::default(),
        lidar: LidarConfig::default(),
        radar: RadarConfig {
            range_bins: 400,
            range_resolution: 0.25,
            ..RadarConfig::default()
        },
        objects,
    }
}

/// Writes a complete recording for `cfg` under `out` and returns its
/// manifest, saved as `out/manifest.txt`. Output bytes depend only on the
/// configuration.
pub fn generate_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<Manifest> {
    let scene = cfg.scene()?;
    let chain = cfg.chain()?;
    let rig = simulated_rig();
    let cameras = cfg.cameras()?;
    let radar_opts = cfg.radar.options()?;
    let class_map = default_class_map();
    let mut m = Manifest::new(out);

    let write_text = |rel: &str, text: &str| formats::write_bytes(&out.join(rel), text.as_bytes());
    write_text("scenario.toml", &cfg.to_toml())?;
    write_text("rig.txt", &rig.to_text())?;
    chain.save(&out.join("poses.csv"))?;
    class_map.save(&out.join("classes.csv"))?;
    m.poses = Some((FrameId::radar(), "poses.csv".into()));
    m.rig = Some("rig.txt".into());
    m.class_map = Some("classes.csv".into());
    for cam in &cameras {
        let rel = format!("cameras/{}.txt", cam.frame);
        write_text(&rel, &cam.to_text())?;
        m.cameras.insert(cam.frame.clone(), rel.into());
    }

    enum Job<'a> {
        Image(&'a CameraModel),
        Lidar(FrameId),
        Radar,
    }
    let mut jobs: Vec<(Job, Timestamp, PathBuf)> = Vec::new();
    for (k, cam) in cameras.iter().enumerate() {
        for t in cfg.ticks(cfg.camera.rate_hz, cfg.camera.phase_ms + k as f64 * cfg.camera.stagger_ms) {
            jobs.push((Job::Image(cam), t, format!("images/{}/{}.png", cam.frame, t.0).into()));
        }
    }
    for (k, name) in LIDAR_FRAMES.iter().enumerate() {
        let frame = FrameId::new(name)?;
        for t in cfg.ticks(cfg.lidar.rate_hz, cfg.lidar.phase_ms + k as f64 * cfg.lidar.stagger_ms) {
            jobs.push((Job::Lidar(frame.clone()), t, format!("lidar/{name}/{}.bin", t.0).into()));
        }
    }
    for t in cfg.ticks(cfg.radar.rate_hz, cfg.radar.phase_ms) {
        jobs.push((Job::Radar, t, format!("radar/{}.bin", t.0).into()));
    }

    let pattern = cfg.lidar.pattern();
    jobs.par_iter().try_for_each(|(job, t, rel)| -> Result<()> {
        let body = chain.interpolate(*t)?;
        let path = out.join(rel);
        match job {
            Job::Image(cam) => {
                let pose = body.compose(rig.extrinsic(&cam.frame)?)?;
                let img = render_semantic_image(&scene, cam, &pose, *t, cfg.camera.dilation_px);
                formats::write_label_png(&path, &img.labels)
            }
            Job::Lidar(frame) => {
                let pose = body.compose(rig.extrinsic(frame)?)?;
                let sim = simulate_lidar(&scene, &pose, *t, &pattern, cfg.lidar.rate_hz);
                formats::write_lidar(&path, &sim.scan)
            }
            Job::Radar => {
                let scan = simulate_radar(&scene, &body, *t, &radar_opts, cfg.seed);
                formats::write_radar(&path, &scan)?;
                let truth = ground_truth_grid(&scene, &body, *t, &radar_opts.geometry, &class_map);
                formats::write_label_png(&out.join(format!("truth/{}.png", t.0)), &truth.labels)
            }
        }
    })?;

    for (job, t, rel) in jobs {
        let entry = |frame: FrameId, path: PathBuf| SensorEntry { time: t, frame, path };
        match job {
            Job::Image(cam) => m.images.push(entry(cam.frame.clone(), rel)),
            Job::Lidar(frame) => m.lidar.push(entry(frame, rel)),
            Job::Radar => {
                m.truth.push(entry(FrameId::radar(), format!("truth/{}.png", t.0).into()));
                m.radar.push(entry(FrameId::radar(), rel));
            }
        }
    }
    m.save(&out.join("manifest.txt"))?;
    Ok(m)
}
