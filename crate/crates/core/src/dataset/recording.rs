//! A manifest with its shared artifacts loaded.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::formats;
use crate::geometry::{FrameId, SensorRig, Timestamp};
use crate::pose_chain::PoseChain;
use crate::sensors::{CameraModel, LidarScan, RadarScan, SemanticImage};
use crate::taxonomy::{default_class_map, ClassMap};

use super::manifest::{Manifest, SensorEntry};

/// Rate assumed for a LiDAR frame with a single scan.
const FALLBACK_LIDAR_RATE_HZ: f64 = 20.0;

pub struct Recording {
    pub manifest: Manifest,
    pub chain: PoseChain,
    pub rig: SensorRig,
    pub class_map: ClassMap,
    pub cameras: BTreeMap<FrameId, CameraModel>,
    lidar_rates: BTreeMap<FrameId, f64>,
}

/// Median spacing of each frame's scans, as a rate.
fn estimate_rates(entries: &[SensorEntry]) -> BTreeMap<FrameId, f64> {
    let mut times: BTreeMap<FrameId, Vec<Timestamp>> = BTreeMap::new();
    for e in entries {
        times.entry(e.frame.clone()).or_default().push(e.time);
    }
    times
        .into_iter()
        .map(|(frame, mut ts)| {
            ts.sort();
            let mut gaps: Vec<i64> = ts.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0).collect();
            gaps.sort_unstable();
            let rate = match gaps.get(gaps.len() / 2) {
                Some(g) => 1e6 / *g as f64,
                None => FALLBACK_LIDAR_RATE_HZ,
            };
            (frame, rate)
        })
        .collect()
}

impl Recording {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        Self::from_manifest(Manifest::load(manifest_path)?)
    }

    pub fn from_manifest(manifest: Manifest) -> Result<Self> {
        let (body, poses) = manifest
            .poses
            .clone()
            .ok_or_else(|| Error::invalid("manifest has no pose file"))?;
        let chain = PoseChain::load(&manifest.resolve(&poses), body)?;
        let rig = match &manifest.rig {
            Some(p) => SensorRig::load(&manifest.resolve(p))?,
            None => SensorRig::new(),
        };
        let class_map = match &manifest.class_map {
            Some(p) => ClassMap::load(&manifest.resolve(p))?,
            None => default_class_map(),
        };
        let cameras = manifest
            .cameras
            .iter()
            .map(|(frame, p)| {
                let cam = CameraModel::load(&manifest.resolve(p))?;
                if &cam.frame != frame {
                    return Err(Error::Frame(format!("camera file for {frame} describes {}", cam.frame)));
                }
                Ok((frame.clone(), cam))
            })
            .collect::<Result<_>>()?;
        let lidar_rates = estimate_rates(&manifest.lidar);
        Ok(Recording {
            manifest,
            chain,
            rig,
            class_map,
            cameras,
            lidar_rates,
        })
    }

    pub fn load_image(&self, entry: &SensorEntry) -> Result<SemanticImage> {
        let camera = self
            .cameras
            .get(&entry.frame)
            .ok_or_else(|| Error::Frame(format!("no intrinsics for camera {}", entry.frame)))?;
        let labels = formats::read_label_png(&self.manifest.resolve(&entry.path))?;
        SemanticImage::new(labels, camera.clone(), entry.time)
    }

    pub fn load_lidar(&self, entry: &SensorEntry) -> Result<LidarScan> {
        let rate = self.lidar_rates.get(&entry.frame).copied().unwrap_or(FALLBACK_LIDAR_RATE_HZ);
        formats::read_lidar(&self.manifest.resolve(&entry.path), entry.frame.clone(), entry.time, rate)
    }

    pub fn load_radar(&self, entry: &SensorEntry) -> Result<RadarScan> {
        let scan = formats::read_radar(&self.manifest.resolve(&entry.path))?;
        if scan.scan_time != entry.time {
            return Err(Error::format(
                self.manifest.resolve(&entry.path),
                format!("scan time {} does not match manifest time {}", scan.scan_time, entry.time),
            ));
        }
        Ok(scan)
    }
}
