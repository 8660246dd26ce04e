use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{Timestamp, Vec3};
use crate::pose_chain::PoseChain;
use crate::sensors::RadarScan;

use super::resample::{sample_polar, CartesianGeometry, Sampling};

/// Three consecutive radar scans in Cartesian form, all expressed in the
/// frame of the newest one. Channels are in chronological order, so
/// `channels[2]` is the newest scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarStack {
    pub channels: [Array2<f32>; 3],
    pub geometry: CartesianGeometry,
    pub times: [Timestamp; 3],
}

impl RadarStack {
    pub fn time(&self) -> Timestamp {
        self.times[2]
    }
}

/// Builds the aligned three-channel input for the newest of `scans`.
///
/// Each output pixel is placed in the newest radar frame, carried through the
/// pose chain into the older scan's frame and sampled there, so stationary
/// structure lands on the same pixel in every channel.
pub fn build_stack(
    scans: [&RadarScan; 3],
    chain: &PoseChain,
    cart: &CartesianGeometry,
    mode: Sampling,
) -> Result<RadarStack> {
    if scans.windows(2).any(|w| w[1].scan_time <= w[0].scan_time) {
        return Err(Error::invalid("stack scans must be strictly time-ordered"));
    }
    let newest = scans[2].scan_time;
    let mut channels: [Array2<f32>; 3] = Default::default();
    for (k, scan) in scans.iter().enumerate() {
        let geom = scan.geometry();
        let tf = chain.relative_pose(scan.scan_time, newest)?;
        channels[k] = Array2::from_shape_fn((cart.size, cart.size), |(row, col)| {
            let (x, y) = cart.pixel_centre(row, col);
            let p = tf.transform_point(&Vec3::new(x, y, 0.0));
            sample_polar(&scan.power, &geom, p.x, p.y, mode)
        });
    }
    Ok(RadarStack {
        channels,
        geometry: *cart,
        times: [scans[0].scan_time, scans[1].scan_time, newest],
    })
}
