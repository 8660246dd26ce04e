//! Range-azimuth label grids: rasterisation of labelled points, accumulation
//! along the trajectory, Cartesian resampling and aligned scan stacks.

mod resample;
mod stack;

pub use resample::{
    cartesian_to_polar, polar_to_cartesian, sample_polar, CartesianGeometry, Resample, Sampling,
};
pub use stack::{build_stack, RadarStack};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SensorRig, Timestamp, RADAR_FRAME};
use crate::pose_chain::PoseChain;
use crate::projection::{radar_from_cloud, LabeledPointCloud};
use crate::sensors::{PolarGeometry, UNLABELED};
use crate::taxonomy::{ClassMap, EMPTY};

/// Default half-width of the accumulation window.
pub const DEFAULT_WINDOW_US: i64 = 8_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridGeometry {
    Polar(PolarGeometry),
    Cartesian(CartesianGeometry),
}

/// Target-taxonomy class per cell; [`EMPTY`] where nothing was observed.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    /// `azimuths x range_bins` or `N x N`.
    pub labels: Array2<u8>,
    pub geometry: GridGeometry,
    pub time: Timestamp,
}

impl LabelGrid {
    pub fn empty_polar(geom: PolarGeometry, time: Timestamp) -> Self {
        LabelGrid {
            labels: Array2::from_elem((geom.azimuths, geom.range_bins), EMPTY),
            geometry: GridGeometry::Polar(geom),
            time,
        }
    }

    /// Nearest-neighbour Cartesian view of a polar grid.
    pub fn to_cartesian(&self, cart: &CartesianGeometry) -> Result<LabelGrid> {
        let GridGeometry::Polar(polar) = self.geometry else {
            return Err(Error::invalid("grid is already Cartesian"));
        };
        Ok(LabelGrid {
            labels: polar_to_cartesian(&self.labels, &polar, cart, Sampling::Nearest)?,
            geometry: GridGeometry::Cartesian(*cart),
            time: self.time,
        })
    }

    /// Fraction of cells holding a non-empty class.
    pub fn coverage(&self) -> f64 {
        let n = self.labels.len().max(1);
        self.labels.iter().filter(|l| **l != EMPTY).count() as f64 / n as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RasterOptions {
    /// Keep only points with `lo <= z <= hi` (radar frame) when set.
    pub z_window: Option<(f64, f64)>,
}

/// Incremental polar rasteriser.
///
/// Each cell keeps one label chosen uniformly among all contributing points
/// (reservoir sampling of size one), so feeding clouds one at a time gives
/// the same distribution as rasterising their union.
pub struct Rasterizer<'a> {
    geom: PolarGeometry,
    class_map: &'a ClassMap,
    opts: RasterOptions,
    labels: Array2<u8>,
    counts: Array2<u32>,
    rng: ChaCha8Rng,
}

impl<'a> Rasterizer<'a> {
    pub fn new(geom: PolarGeometry, class_map: &'a ClassMap, opts: RasterOptions, seed: u64) -> Self {
        Rasterizer {
            geom,
            class_map,
            opts,
            labels: Array2::from_elem((geom.azimuths, geom.range_bins), EMPTY),
            counts: Array2::zeros((geom.azimuths, geom.range_bins)),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Adds one radar-frame point with a source-taxonomy label.
    pub fn add(&mut self, x: f64, y: f64, z: f64, source_label: u8) {
        if source_label == UNLABELED {
            return;
        }
        // Empty-mapped points are candidates like any other; omitted ones are not.
        let Some(target) = self.class_map.map(source_label) else {
            return;
        };
        if let Some((lo, hi)) = self.opts.z_window {
            if !(lo <= z && z <= hi) {
                return;
            }
        }
        let Some(cell) = self.geom.bin_of(x, y) else {
            return;
        };
        let count = &mut self.counts[cell];
        *count += 1;
        if *count == 1 || self.rng.random_range(0..*count) == 0 {
            self.labels[cell] = target;
        }
    }

    pub fn add_cloud(&mut self, cloud: &LabeledPointCloud) -> Result<()> {
        if cloud.frame.as_str() != RADAR_FRAME {
            return Err(Error::Frame(format!(
                "rasterising a cloud in {} rather than radar",
                cloud.frame
            )));
        }
        for (p, l) in cloud.points.iter().zip(&cloud.labels) {
            self.add(p.x, p.y, p.z, *l);
        }
        Ok(())
    }

    /// Number of labelled points that landed in each cell.
    pub fn counts(&self) -> &Array2<u32> {
        &self.counts
    }

    pub fn finish(self, time: Timestamp) -> LabelGrid {
        LabelGrid {
            labels: self.labels,
            geometry: GridGeometry::Polar(self.geom),
            time,
        }
    }
}

/// Polar label grid of a radar-frame cloud.
pub fn rasterize(
    cloud: &LabeledPointCloud,
    geom: &PolarGeometry,
    class_map: &ClassMap,
    opts: &RasterOptions,
    seed: u64,
) -> Result<LabelGrid> {
    let mut r = Rasterizer::new(*geom, class_map, *opts, seed);
    r.add_cloud(cloud)?;
    Ok(r.finish(cloud.time))
}

/// Indices of the clouds used for a radar scan at `t_radar`: every cloud
/// within `window_us` of it, plus the temporally nearest one. `times` must be
/// sorted.
pub fn select_window(times: &[Timestamp], t_radar: Timestamp, window_us: i64) -> Vec<usize> {
    let lo = times.partition_point(|t| *t < t_radar.offset(-window_us));
    let hi = times.partition_point(|t| *t <= t_radar.offset(window_us));
    let mut picked: Vec<usize> = (lo..hi).collect();
    if picked.is_empty() && !times.is_empty() {
        let after = times.partition_point(|t| *t < t_radar);
        let nearest = match (after.checked_sub(1), (after < times.len()).then_some(after)) {
            (Some(b), Some(a)) => {
                if (t_radar - times[b]) <= (times[a] - t_radar) {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!(),
        };
        picked.push(nearest);
    }
    picked
}

/// Union of the selected clouds, each moved into the radar frame at
/// `t_radar`. Clouds the chain cannot place are skipped with a warning.
pub fn accumulate_horizon(
    clouds: &[LabeledPointCloud],
    rig: &SensorRig,
    chain: &PoseChain,
    t_radar: Timestamp,
    window_us: i64,
) -> Result<LabeledPointCloud> {
    if !chain.contains(t_radar) {
        return Err(Error::OutOfRange {
            t: t_radar,
            start: chain.start(),
            end: chain.end(),
        });
    }
    let mut order: Vec<usize> = (0..clouds.len()).collect();
    order.sort_by_key(|i| clouds[*i].time);
    let times: Vec<Timestamp> = order.iter().map(|i| clouds[*i].time).collect();
    let mut out = LabeledPointCloud::empty(crate::geometry::FrameId::radar(), t_radar);
    for k in select_window(&times, t_radar, window_us) {
        let cloud = &clouds[order[k]];
        let tf = match radar_from_cloud(&cloud.frame, cloud.time, rig, chain, t_radar) {
            Ok(tf) => tf,
            Err(e) => {
                log::warn!("skipping cloud at {}: {e}", cloud.time);
                continue;
            }
        };
        out.points.extend(cloud.points.iter().map(|p| tf.transform_point(p)));
        out.labels.extend_from_slice(&cloud.labels);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FrameId, Pose, UnitQuaternion, Vec3};
    use crate::taxonomy::{default_class_map, source, CONSTRUCTION, PEDESTRIAN, VEHICLE};
    use proptest::prelude::*;

    fn radar_cloud(points: Vec<Vec3>, labels: Vec<u8>) -> LabeledPointCloud {
        LabeledPointCloud::new(points, labels, FrameId::radar(), Timestamp(0)).unwrap()
    }

    #[test]
    fn empty_cloud_gives_empty_grid() {
        let g = PolarGeometry::new(8, 10, 1.0).unwrap();
        let grid = rasterize(&radar_cloud(vec![], vec![]), &g, &default_class_map(), &RasterOptions::default(), 0).unwrap();
        assert!(grid.labels.iter().all(|l| *l == EMPTY));
    }

    #[test]
    fn single_point_lands_in_formula_bin() {
        let g = PolarGeometry::new(400, 100, 0.5).unwrap();
        let cloud = radar_cloud(vec![Vec3::new(10.0, 0.0, 0.3)], vec![source::BUILDING]);
        let grid = rasterize(&cloud, &g, &default_class_map(), &RasterOptions::default(), 0).unwrap();
        assert_eq!(grid.labels[[0, 20]], CONSTRUCTION);
        assert_eq!(grid.labels.iter().filter(|l| **l != EMPTY).count(), 1);
    }

    #[test]
    fn skips_unlabelled_and_far_points() {
        let g = PolarGeometry::new(8, 10, 1.0).unwrap();
        let cloud = radar_cloud(
            vec![Vec3::new(1.5, 0.1, 0.0), Vec3::new(2.5, 0.1, 0.0), Vec3::new(50.0, 0.0, 0.0), Vec3::new(3.5, 0.1, 0.0)],
            vec![UNLABELED, source::ROAD, source::CAR, source::CAR],
        );
        let grid = rasterize(&cloud, &g, &default_class_map(), &RasterOptions::default(), 0).unwrap();
        assert_eq!(grid.labels.iter().filter(|l| **l != EMPTY).count(), 1);
        assert_eq!(grid.labels[[0, 3]], VEHICLE);
    }

    #[test]
    fn empty_mapped_points_compete_for_a_cell() {
        let g = PolarGeometry::new(4, 4, 1.0).unwrap();
        let mut pts = vec![Vec3::new(1.5, 0.05, 0.0)];
        let mut labels = vec![source::CAR];
        for i in 0..9 {
            pts.push(Vec3::new(1.1 + 0.08 * i as f64, 0.05, 0.0));
            labels.push(source::ROAD);
        }
        let cloud = radar_cloud(pts, labels);
        let map = default_class_map();
        let cars = (0..2000)
            .filter(|s| rasterize(&cloud, &g, &map, &RasterOptions::default(), *s).unwrap().labels[[0, 1]] == VEHICLE)
            .count();
        // Binomial(2000, 0.1): mean 200, sd 13.4.
        assert!((150..250).contains(&cars), "{cars}");
    }

    #[test]
    fn z_window_filters() {
        let g = PolarGeometry::new(8, 10, 1.0).unwrap();
        let cloud = radar_cloud(vec![Vec3::new(1.5, 0.1, 5.0)], vec![source::CAR]);
        let opts = RasterOptions { z_window: Some((-1.0, 2.0)) };
        let grid = rasterize(&cloud, &g, &default_class_map(), &opts, 0).unwrap();
        assert!(grid.labels.iter().all(|l| *l == EMPTY));
    }

    #[test]
    fn rejects_non_radar_cloud() {
        let g = PolarGeometry::new(8, 10, 1.0).unwrap();
        let cloud = LabeledPointCloud::new(vec![], vec![], FrameId::new("lidar").unwrap(), Timestamp(0)).unwrap();
        assert!(matches!(
            rasterize(&cloud, &g, &default_class_map(), &RasterOptions::default(), 0),
            Err(Error::Frame(_))
        ));
    }

    #[test]
    fn select_window_cases() {
        let t: Vec<Timestamp> = [0, 100, 200, 300].into_iter().map(Timestamp).collect();
        assert_eq!(select_window(&t, Timestamp(140), 0), vec![1]);
        assert_eq!(select_window(&t, Timestamp(160), 0), vec![2]);
        assert_eq!(select_window(&t, Timestamp(150), 0), vec![1]);
        assert_eq!(select_window(&t, Timestamp(200), 0), vec![2]);
        assert_eq!(select_window(&t, Timestamp(150), 100), vec![1, 2]);
        assert_eq!(select_window(&t, Timestamp(500), 10), vec![3]);
        assert!(select_window(&[], Timestamp(0), 10).is_empty());
    }

    #[test]
    fn static_duplicates_superpose() {
        let pose = Pose::new(UnitQuaternion::rot_z(0.3), Vec3::new(5.0, 1.0, 0.0), FrameId::world(), FrameId::radar());
        let chain = PoseChain::new(vec![(Timestamp(0), pose.clone()), (Timestamp(10_000_000), pose)]).unwrap();
        let mut a = radar_cloud(vec![Vec3::new(3.0, 4.0, 1.0)], vec![source::CAR]);
        a.time = Timestamp(1_000_000);
        let mut b = a.clone();
        b.time = Timestamp(2_000_000);
        let acc = accumulate_horizon(&[a, b], &SensorRig::new(), &chain, Timestamp(1_500_000), DEFAULT_WINDOW_US).unwrap();
        assert_eq!(acc.len(), 2);
        assert!((acc.points[0] - acc.points[1]).norm() < 1e-6);
        assert_eq!(acc.time, Timestamp(1_500_000));
    }

    #[test]
    fn accumulate_skips_clouds_outside_chain() {
        let pose = Pose::identity(FrameId::radar()).with_frames(FrameId::world(), FrameId::radar());
        let chain = PoseChain::new(vec![(Timestamp(0), pose.clone()), (Timestamp(1_000), pose)]).unwrap();
        let mut a = radar_cloud(vec![Vec3::new(1.0, 0.0, 0.0)], vec![source::CAR]);
        a.time = Timestamp(500);
        let mut b = a.clone();
        b.time = Timestamp(5_000);
        let acc = accumulate_horizon(&[a, b], &SensorRig::new(), &chain, Timestamp(600), 10_000).unwrap();
        assert_eq!(acc.len(), 1);
        assert!(accumulate_horizon(&[], &SensorRig::new(), &chain, Timestamp(2_000), 0).is_err());
    }

    /// Brute-force oracle: every label that reaches a cell is equally likely
    /// to be the one kept.
    #[test]
    fn contended_cell_is_uniform() {
        let g = PolarGeometry::new(4, 4, 1.0).unwrap();
        let labels = [source::CAR, source::PERSON, source::BUILDING, source::CAR];
        let pts: Vec<Vec3> = (0..4).map(|i| Vec3::new(1.2 + 0.1 * i as f64, 0.05, 0.0)).collect();
        let cloud = radar_cloud(pts.clone(), labels.to_vec());
        let map = default_class_map();
        // Oracle: enumerate membership of the contended cell (1 point per label slot).
        let mut expected = [0.0f64; 7];
        for (p, l) in pts.iter().zip(labels) {
            assert_eq!(g.bin_of(p.x, p.y), Some((0, 1)));
            expected[map.map(l).unwrap() as usize] += 1.0 / 4.0;
        }
        let trials = 1000;
        let mut seen = [0usize; 7];
        for seed in 0..trials {
            let grid = rasterize(&cloud, &g, &map, &RasterOptions::default(), seed).unwrap();
            seen[grid.labels[[0, 1]] as usize] += 1;
        }
        let chi2: f64 = [VEHICLE, PEDESTRIAN, CONSTRUCTION]
            .iter()
            .map(|c| {
                let e = expected[*c as usize] * trials as f64;
                (seen[*c as usize] as f64 - e).powi(2) / e
            })
            .sum();
        // 2 degrees of freedom, p = 0.001.
        assert!(chi2 < 13.82, "chi2 = {chi2}, counts {seen:?}");
        assert_eq!(seen.iter().sum::<usize>(), trials as usize);
    }

    proptest! {
        #[test]
        fn rasterize_emits_only_input_classes(
            pts in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0, 0u8..34), 0..200),
            seed in any::<u64>(),
        ) {
            let g = PolarGeometry::new(36, 20, 1.0).unwrap();
            let map = default_class_map();
            let cloud = radar_cloud(
                pts.iter().map(|p| Vec3::new(p.0, p.1, 0.0)).collect(),
                pts.iter().map(|p| p.2).collect(),
            );
            let allowed: std::collections::BTreeSet<u8> =
                pts.iter().map(|p| map.map_or_empty(p.2)).chain([EMPTY]).collect();
            let grid = rasterize(&cloud, &g, &map, &RasterOptions::default(), seed).unwrap();
            prop_assert!(grid.labels.iter().all(|l| allowed.contains(l)));
        }
    }
}
