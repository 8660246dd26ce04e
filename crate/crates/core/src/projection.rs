//! Transfer of image labels onto LiDAR points, and motion-compensated
//! re-expression of labelled clouds in the radar frame.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formats;
use crate::geometry::{FrameId, Pose, SensorRig, Timestamp, Vec3};
use crate::pose_chain::PoseChain;
use crate::sensors::{LidarScan, SemanticImage, UNLABELED};

/// 3D points with one source-taxonomy label each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    pub points: Vec<Vec3>,
    pub labels: Vec<u8>,
    pub frame: FrameId,
    pub time: Timestamp,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<Vec3>, labels: Vec<u8>, frame: FrameId, time: Timestamp) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        Ok(LabeledPointCloud {
            points,
            labels,
            frame,
            time,
        })
    }

    pub fn empty(frame: FrameId, time: Timestamp) -> Self {
        LabeledPointCloud {
            points: Vec::new(),
            labels: Vec::new(),
            frame,
            time,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn labelled_count(&self) -> usize {
        self.labels.iter().filter(|l| **l != UNLABELED).count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        formats::write_bytes(path, &formats::encode_labelled(&self.points, &self.labels))
    }

    pub fn load(path: &Path, frame: FrameId, time: Timestamp) -> Result<Self> {
        let (points, labels) = formats::decode_labelled(&formats::read_bytes(path)?, path)?;
        LabeledPointCloud::new(points, labels, frame, time)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LabellingOptions {
    /// Compensate ego-motion between each image and the LiDAR scan.
    pub motion_correction: bool,
    /// Global seed; the per-scan generator is seeded with `seed ^ scan time`.
    pub seed: u64,
}

impl Default for LabellingOptions {
    fn default() -> Self {
        LabellingOptions {
            motion_correction: true,
            seed: 0,
        }
    }
}

/// Seed of the per-item generator, independent of processing order.
pub fn item_seed(global: u64, t: Timestamp) -> u64 {
    global ^ (t.0 as u64)
}

/// `camera -> lidar` transform: maps LiDAR points at scan time into the
/// camera frame at image time.
fn camera_from_lidar(
    scan: &LidarScan,
    image: &SemanticImage,
    rig: &SensorRig,
    chain: &PoseChain,
    motion_correction: bool,
) -> Result<Pose> {
    let radar_cam = rig.extrinsic(&image.camera.frame)?;
    let radar_lidar = rig.extrinsic(&scan.frame)?;
    let motion = if motion_correction {
        chain
            .relative_pose(image.time, scan.time)?
            .with_frames(FrameId::radar(), FrameId::radar())
    } else {
        Pose::identity(FrameId::radar())
    };
    radar_cam.inverse().compose(&motion)?.compose(radar_lidar)
}

/// Labels every point of `scan` from the images it projects into.
///
/// Points seen by no image stay [`UNLABELED`]; points seen by several images
/// take one of the candidate labels uniformly at random.
pub fn label_pointcloud(
    scan: &LidarScan,
    images: &[SemanticImage],
    rig: &SensorRig,
    chain: &PoseChain,
    opts: &LabellingOptions,
) -> Result<LabeledPointCloud> {
    let transforms = images
        .iter()
        .map(|img| camera_from_lidar(scan, img, rig, chain, opts.motion_correction))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(item_seed(opts.seed, scan.time));
    let mut candidates: Vec<u8> = Vec::with_capacity(images.len());
    let labels = scan
        .points
        .iter()
        .map(|p| {
            candidates.clear();
            for (img, tf) in images.iter().zip(&transforms) {
                let pc = tf.transform_point(p);
                if let Some((u, v)) = img.camera.project(&pc) {
                    // project() guarantees the pixel is inside the image.
                    let label = img.lookup_label(u, v).unwrap_or(UNLABELED);
                    if label != UNLABELED {
                        candidates.push(label);
                    }
                }
            }
            match candidates.len() {
                0 => UNLABELED,
                1 => candidates[0],
                n => candidates[rng.random_range(0..n)],
            }
        })
        .collect();

    LabeledPointCloud::new(scan.points.clone(), labels, scan.frame.clone(), scan.time)
}

/// `radar(t_radar) -> cloud frame(cloud.time)`.
pub fn radar_from_cloud(
    cloud_frame: &FrameId,
    cloud_time: Timestamp,
    rig: &SensorRig,
    chain: &PoseChain,
    t_radar: Timestamp,
) -> Result<Pose> {
    let extrinsic = rig.extrinsic(cloud_frame)?;
    let motion = chain
        .relative_pose(t_radar, cloud_time)?
        .with_frames(FrameId::radar(), FrameId::radar());
    motion.compose(extrinsic)
}

/// Expresses `cloud` in the radar frame at `t_radar`.
pub fn to_radar_frame(
    cloud: &LabeledPointCloud,
    rig: &SensorRig,
    chain: &PoseChain,
    t_radar: Timestamp,
) -> Result<LabeledPointCloud> {
    let tf = radar_from_cloud(&cloud.frame, cloud.time, rig, chain, t_radar)?;
    Ok(LabeledPointCloud {
        points: cloud.points.iter().map(|p| tf.transform_point(p)).collect(),
        labels: cloud.labels.clone(),
        frame: FrameId::radar(),
        time: t_radar,
    })
}
