//! Sensor geometry: pinhole cameras, LiDAR scans and the polar layout of the
//! scanning radar.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrameId, Timestamp, Vec3};

/// Label value for pixels and points that carry no class.
pub const UNLABELED: u8 = 255;

/// Points closer than this along the optical axis are not projected.
pub const NEAR_PLANE_M: f64 = 0.1;

/// Ideal pinhole camera. Camera frame is optical: x right, y down, z forward.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub frame: FrameId,
    pub rate_hz: f64,
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        frame: FrameId,
        rate_hz: f64,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::invalid("camera focal lengths must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera image must be non-empty"));
        }
        if !(rate_hz > 0.0) {
            return Err(Error::invalid("camera rate must be positive"));
        }
        Ok(CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            frame,
            rate_hz,
        })
    }

    /// Pixel coordinates of a camera-frame point, or `None` when it is behind
    /// the near plane or outside the image.
    pub fn project(&self, pt: &Vec3) -> Option<(f64, f64)> {
        if !(pt.z > NEAR_PLANE_M) {
            return None;
        }
        let u = self.fx * pt.x / pt.z + self.cx;
        let v = self.fy * pt.y / pt.z + self.cy;
        let inside = (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v);
        inside.then_some((u, v))
    }

    /// Unit-less viewing ray through pixel `(u, v)`, with `z = 1`.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let kv = crate::formats::KeyValues::parse(text, path)?;
        CameraModel::new(
            kv.float("fx")?,
            kv.float("fy")?,
            kv.float("cx")?,
            kv.float("cy")?,
            kv.usize("width")?,
            kv.usize("height")?,
            FrameId::new(kv.str("frame")?).map_err(|e| Error::format(path, e))?,
            kv.float("rate")?,
        )
        .map_err(|e| Error::format(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\nwidth = {}\nheight = {}\nframe = {}\nrate = {}\n",
            self.fx, self.fy, self.cx, self.cy, self.width, self.height, self.frame, self.rate_hz
        )
    }
}

/// Per-pixel class indices (source taxonomy) from any segmentation source.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticImage {
    /// `height x width`.
    pub labels: Array2<u8>,
    pub camera: CameraModel,
    pub time: Timestamp,
}

impl SemanticImage {
    pub fn new(labels: Array2<u8>, camera: CameraModel, time: Timestamp) -> Result<Self> {
        if labels.dim() != (camera.height, camera.width) {
            return Err(Error::invalid(format!(
                "label image is {:?}, camera expects {}x{}",
                labels.dim(),
                camera.height,
                camera.width
            )));
        }
        Ok(SemanticImage {
            labels,
            camera,
            time,
        })
    }

    /// Label of the pixel containing `(u, v)`.
    pub fn lookup_label(&self, u: f64, v: f64) -> Result<u8> {
        let (h, w) = self.labels.dim();
        if !(u >= 0.0 && v >= 0.0 && u < w as f64 && v < h as f64) {
            return Err(Error::Bounds {
                u,
                v,
                width: w,
                height: h,
            });
        }
        Ok(self.labels[[v.floor() as usize, u.floor() as usize]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub points: Vec<Vec3>,
    pub frame: FrameId,
    pub time: Timestamp,
    pub rate_hz: f64,
}

impl LidarScan {
    pub fn new(points: Vec<Vec3>, frame: FrameId, time: Timestamp, rate_hz: f64) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("non-finite LiDAR point at index {i}")));
        }
        if !(rate_hz > 0.0) {
            return Err(Error::invalid("LiDAR rate must be positive"));
        }
        Ok(LidarScan {
            points,
            frame,
            time,
            rate_hz,
        })
    }
}

/// Range-azimuth layout of a polar radar grid.
///
/// Azimuth bin `a` covers `[a, a + 1) * 2pi / azimuths`, measured
/// counter-clockwise from the radar's +x axis. Range bin `r` covers
/// `[r, r + 1) * range_resolution` metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGeometry {
    pub azimuths: usize,
    pub range_bins: usize,
    pub range_resolution: f64,
}

impl Default for PolarGeometry {
    fn default() -> Self {
        PolarGeometry {
            azimuths: 400,
            range_bins: 1000,
            range_resolution: 0.175,
        }
    }
}

impl PolarGeometry {
    pub fn new(azimuths: usize, range_bins: usize, range_resolution: f64) -> Result<Self> {
        if azimuths == 0 || range_bins == 0 || !(range_resolution > 0.0) {
            return Err(Error::invalid("polar geometry fields must be positive"));
        }
        Ok(PolarGeometry {
            azimuths,
            range_bins,
            range_resolution,
        })
    }

    pub fn max_range(&self) -> f64 {
        self.range_bins as f64 * self.range_resolution
    }

    pub fn azimuth_step(&self) -> f64 {
        std::f64::consts::TAU / self.azimuths as f64
    }

    /// Bin of a horizontal-plane position, or `None` beyond the last range bin.
    pub fn bin_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let range = x.hypot(y);
        let r = (range / self.range_resolution).floor();
        if !(r < self.range_bins as f64) {
            return None;
        }
        let az = y.atan2(x).rem_euclid(std::f64::consts::TAU);
        let a = ((az / self.azimuth_step()).floor() as usize).min(self.azimuths - 1);
        Some((a, r as usize))
    }

    /// Centre of bin `(a, r)` as `(bearing rad, range m)`.
    pub fn bin_centre(&self, a: usize, r: usize) -> (f64, f64) {
        (
            (a as f64 + 0.5) * self.azimuth_step(),
            (r as f64 + 0.5) * self.range_resolution,
        )
    }
}

/// One full radar sweep: power per azimuth and range bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarScan {
    /// `azimuths x range_bins`, non-negative.
    pub power: Array2<f32>,
    pub azimuth_times: Vec<Timestamp>,
    pub range_resolution: f64,
    pub frame: FrameId,
    pub scan_time: Timestamp,
    pub rate_hz: f64,
}

impl RadarScan {
    pub fn new(
        power: Array2<f32>,
        azimuth_times: Vec<Timestamp>,
        range_resolution: f64,
        frame: FrameId,
        scan_time: Timestamp,
        rate_hz: f64,
    ) -> Result<Self> {
        let (a, r) = power.dim();
        if a == 0 || r == 0 {
            return Err(Error::invalid("radar scan must have at least one bin"));
        }
        if azimuth_times.len() != a {
            return Err(Error::invalid(format!(
                "{} azimuth timestamps for {a} azimuths",
                azimuth_times.len()
            )));
        }
        if azimuth_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("azimuth timestamps must be non-decreasing"));
        }
        if power.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("radar power must be non-negative"));
        }
        if !(range_resolution > 0.0) || !(rate_hz > 0.0) {
            return Err(Error::invalid("radar resolution and rate must be positive"));
        }
        Ok(RadarScan {
            power,
            azimuth_times,
            range_resolution,
            frame,
            scan_time,
            rate_hz,
        })
    }

    pub fn geometry(&self) -> PolarGeometry {
        let (a, r) = self.power.dim();
        PolarGeometry {
            azimuths: a,
            range_bins: r,
            range_resolution: self.range_resolution,
        }
    }
}
