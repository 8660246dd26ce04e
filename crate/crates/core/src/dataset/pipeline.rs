//! Recording to training items: labelled clouds, accumulation, polar and
//! Cartesian label grids, and aligned radar stacks.
//!
//! Every random choice is seeded from the global seed and a sensor
//! timestamp, so an item does not depend on which other items were built,
//! in what order, or on how many threads.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::geometry::{FrameId, Timestamp};
use crate::grid::{build_stack, select_window, CartesianGeometry, GridGeometry, LabelGrid, RadarStack, RasterOptions, Rasterizer, Sampling};
use crate::projection::{item_seed, label_pointcloud, radar_from_cloud, LabeledPointCloud, LabellingOptions};
use crate::sensors::{PolarGeometry, RadarScan, SemanticImage};

use super::manifest::SensorEntry;
use super::recording::Recording;

/// Items built per parallel batch; caches are trimmed between batches.
const BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Half-width of the LiDAR accumulation window.
    pub window_secs: f64,
    /// Side of the Cartesian label grids and stacks, in pixels.
    pub cartesian_size: usize,
    pub motion_correction: bool,
    /// Images further than this from a LiDAR scan are not used to label it.
    pub max_image_gap_ms: f64,
    /// Radar-frame height band of points that may claim cells.
    pub z_window: Option<[f64; 2]>,
    pub stack_sampling: Sampling,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            window_secs: crate::grid::DEFAULT_WINDOW_US as f64 * 1e-6,
            cartesian_size: 256,
            motion_correction: true,
            max_image_gap_ms: 100.0,
            z_window: None,
            stack_sampling: Sampling::Bilinear,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_secs >= 0.0) || !(self.max_image_gap_ms >= 0.0) {
            return Err(Error::invalid("window_secs and max_image_gap_ms must be non-negative"));
        }
        if self.cartesian_size == 0 {
            return Err(Error::invalid("cartesian_size must be positive"));
        }
        if let Some([lo, hi]) = self.z_window {
            if !(lo <= hi) {
                return Err(Error::invalid("z_window must be [low, high]"));
            }
        }
        Ok(())
    }

    fn window_us(&self) -> i64 {
        (self.window_secs * 1e6).round() as i64
    }
}

/// One training example, keyed by the newest radar scan's timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub time: Timestamp,
    /// World position of the radar at `time`.
    pub ego: [f64; 2],
    pub polar: LabelGrid,
    pub cartesian: LabelGrid,
    pub stack: RadarStack,
    /// Reference polar grid shipped with the recording, if any.
    pub truth: Option<LabelGrid>,
}

#[derive(Debug)]
pub struct ItemFailure {
    pub time: Timestamp,
    pub error: Error,
}

type Slot<T> = OnceLock<std::result::Result<Arc<T>, String>>;

fn slots<T>(n: usize) -> Vec<Slot<T>> {
    (0..n).map(|_| OnceLock::new()).collect()
}

fn cached<T>(slot: &Slot<T>, load: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
    slot.get_or_init(|| load().map(Arc::new).map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::Invalid)
}

pub struct Pipeline<'r> {
    rec: &'r Recording,
    cfg: PipelineConfig,
    polar: PolarGeometry,
    cart: CartesianGeometry,
    /// Sorted by time, then frame.
    lidar: Vec<SensorEntry>,
    lidar_times: Vec<Timestamp>,
    images: BTreeMap<FrameId, Vec<SensorEntry>>,
    radar: Vec<SensorEntry>,
    planned: Vec<usize>,
    skipped: usize,
    clouds: Vec<Slot<Option<LabeledPointCloud>>>,
    image_cache: BTreeMap<FrameId, Vec<Slot<SemanticImage>>>,
    scans: Vec<Slot<RadarScan>>,
}

impl<'r> Pipeline<'r> {
    /// Plans one item per radar scan that has two predecessors and whose
    /// three scans all lie within the pose chain. Uncovered scans are
    /// skipped with a warning.
    pub fn new(rec: &'r Recording, cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let mut lidar = rec.manifest.lidar.clone();
        lidar.sort_by(|a, b| (a.time, &a.frame).cmp(&(b.time, &b.frame)));
        let lidar_times = lidar.iter().map(|e| e.time).collect();
        let mut images: BTreeMap<FrameId, Vec<SensorEntry>> = BTreeMap::new();
        for e in &rec.manifest.images {
            images.entry(e.frame.clone()).or_default().push(e.clone());
        }
        for list in images.values_mut() {
            list.sort();
        }
        let mut radar = rec.manifest.radar.clone();
        radar.sort();

        let polar = match radar.first() {
            Some(e) => rec.load_radar(e)?.geometry(),
            None => PolarGeometry::default(),
        };
        let cart = CartesianGeometry::covering(&polar, cfg.cartesian_size)?;

        let mut planned = Vec::new();
        let mut skipped = 0;
        for k in 0..radar.len() {
            let t = radar[k].time;
            if !rec.chain.contains(t) {
                log::warn!("radar scan {t}: outside pose chain coverage, skipped");
                skipped += 1;
            } else if k < 2 {
                log::info!("radar scan {t}: fewer than two earlier scans, no stack");
                skipped += 1;
            } else if !(k - 2..k).all(|j| rec.chain.contains(radar[j].time)) {
                log::warn!("radar scan {t}: earlier scans outside pose chain coverage, skipped");
                skipped += 1;
            } else {
                planned.push(k);
            }
        }

        Ok(Pipeline {
            rec,
            polar,
            cart,
            clouds: slots(lidar.len()),
            image_cache: images.iter().map(|(f, l)| (f.clone(), slots(l.len()))).collect(),
            scans: slots(radar.len()),
            cfg,
            lidar,
            lidar_times,
            images,
            radar,
            planned,
            skipped,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn polar_geometry(&self) -> PolarGeometry {
        self.polar
    }

    pub fn cartesian_geometry(&self) -> CartesianGeometry {
        self.cart
    }

    /// Radar timestamps of the items this pipeline will produce.
    pub fn planned_times(&self) -> Vec<Timestamp> {
        self.planned.iter().map(|k| self.radar[*k].time).collect()
    }

    /// Radar scans that will not produce an item.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    fn image(&self, frame: &FrameId, i: usize) -> Result<Arc<SemanticImage>> {
        let entry = &self.images[frame][i];
        cached(&self.image_cache[frame][i], || self.rec.load_image(entry))
    }

    /// Per camera, the image nearest to `t` within the gap limit whose time
    /// the chain covers.
    fn images_for(&self, t: Timestamp) -> Result<Vec<Arc<SemanticImage>>> {
        let max_gap = (self.cfg.max_image_gap_ms * 1e3).round() as i64;
        let mut out = Vec::new();
        for (frame, list) in &self.images {
            let after = list.partition_point(|e| e.time < t);
            let best = [after.checked_sub(1), Some(after)]
                .into_iter()
                .flatten()
                .filter(|i| *i < list.len() && self.rec.chain.contains(list[*i].time))
                .min_by_key(|i| ((list[*i].time - t).abs(), list[*i].time));
            if let Some(i) = best {
                if (list[i].time - t).abs() <= max_gap {
                    out.push(self.image(frame, i)?);
                }
            }
        }
        Ok(out)
    }

    /// Labelled LiDAR scan `i` reduced to points whose class can claim a
    /// cell; `None` when the chain cannot place the scan.
    fn cloud(&self, i: usize) -> Result<Arc<Option<LabeledPointCloud>>> {
        cached(&self.clouds[i], || {
            let entry = &self.lidar[i];
            if !self.rec.chain.contains(entry.time) {
                log::warn!("lidar scan {} {}: outside pose chain coverage, unused", entry.frame, entry.time);
                return Ok(None);
            }
            let scan = self.rec.load_lidar(entry)?;
            let images = self.images_for(entry.time)?;
            let images: Vec<SemanticImage> = images.iter().map(|a| (**a).clone()).collect();
            let opts = LabellingOptions {
                motion_correction: self.cfg.motion_correction,
                seed: self.cfg.seed,
            };
            let labelled = label_pointcloud(&scan, &images, &self.rec.rig, &self.rec.chain, &opts)?;
            let map = &self.rec.class_map;
            let (points, labels): (Vec<_>, Vec<_>) = labelled
                .points
                .iter()
                .zip(&labelled.labels)
                .filter(|(_, l)| map.map(**l).is_some())
                .map(|(p, l)| (*p, *l))
                .unzip();
            Ok(Some(LabeledPointCloud::new(points, labels, labelled.frame, labelled.time)?))
        })
    }

    fn scan(&self, k: usize) -> Result<Arc<RadarScan>> {
        cached(&self.scans[k], || {
            let scan = self.rec.load_radar(&self.radar[k])?;
            if scan.geometry() != self.polar {
                return Err(Error::invalid(format!(
                    "radar scan {} has geometry {:?}, expected {:?}",
                    scan.scan_time,
                    scan.geometry(),
                    self.polar
                )));
            }
            Ok(scan)
        })
    }

    /// Polar label grid for the radar scan at `t`.
    pub fn label_grid(&self, t: Timestamp) -> Result<LabelGrid> {
        let opts = RasterOptions {
            z_window: self.cfg.z_window.map(|[lo, hi]| (lo, hi)),
        };
        let mut raster = Rasterizer::new(self.polar, &self.rec.class_map, opts, item_seed(self.cfg.seed, t));
        for i in select_window(&self.lidar_times, t, self.cfg.window_us()) {
            let cloud = self.cloud(i)?;
            let Some(cloud) = cloud.as_ref() else { continue };
            let tf = radar_from_cloud(&cloud.frame, cloud.time, &self.rec.rig, &self.rec.chain, t)?;
            for (p, l) in cloud.points.iter().zip(&cloud.labels) {
                let q = tf.transform_point(p);
                raster.add(q.x, q.y, q.z, *l);
            }
        }
        Ok(raster.finish(t))
    }

    fn truth(&self, t: Timestamp) -> Result<Option<LabelGrid>> {
        let list = &self.rec.manifest.truth;
        let Ok(i) = list.binary_search_by_key(&t, |e| e.time) else {
            return Ok(None);
        };
        let labels = formats::read_label_png(&self.rec.manifest.resolve(&list[i].path))?;
        if labels.dim() != (self.polar.azimuths, self.polar.range_bins) {
            return Err(Error::format(&list[i].path, "truth grid does not match radar geometry"));
        }
        Ok(Some(LabelGrid {
            labels,
            geometry: GridGeometry::Polar(self.polar),
            time: t,
        }))
    }

    fn build(&self, k: usize) -> Result<Item> {
        let t = self.radar[k].time;
        let polar = self.label_grid(t)?;
        let cartesian = polar.to_cartesian(&self.cart)?;
        let scans = [self.scan(k - 2)?, self.scan(k - 1)?, self.scan(k)?];
        let stack = build_stack(
            [&scans[0], &scans[1], &scans[2]],
            &self.rec.chain,
            &self.cart,
            self.cfg.stack_sampling,
        )?;
        let ego = self.rec.chain.interpolate(t)?.translation;
        Ok(Item {
            time: t,
            ego: [ego.x, ego.y],
            polar,
            cartesian,
            stack,
            truth: self.truth(t)?,
        })
    }

    /// Builds the item for the radar scan at `t`, which must be planned.
    pub fn item(&self, t: Timestamp) -> Result<Item> {
        let k = self
            .planned
            .iter()
            .copied()
            .find(|k| self.radar[*k].time == t)
            .ok_or_else(|| Error::invalid(format!("no item planned at {t}")))?;
        self.build(k)
    }

    /// Drops cached inputs that no item at or after radar index `k` can use.
    fn trim(&mut self, k: usize) {
        let t = self.radar[k].time;
        let horizon = t.offset(-self.cfg.window_us() - 1_000_000);
        for (i, slot) in self.clouds.iter_mut().enumerate() {
            if self.lidar_times[i] < horizon {
                slot.take();
            }
        }
        for (frame, list) in &self.images {
            for (e, slot) in list.iter().zip(self.image_cache.get_mut(frame).into_iter().flatten()) {
                if e.time < horizon {
                    slot.take();
                }
            }
        }
        for slot in self.scans.iter_mut().take(k.saturating_sub(2)) {
            slot.take();
        }
    }

    /// Items in time order, built in parallel batches.
    pub fn stream(self) -> ItemStream<'r> {
        ItemStream {
            pipeline: self,
            next: 0,
            ready: VecDeque::new(),
        }
    }
}

pub struct ItemStream<'r> {
    pipeline: Pipeline<'r>,
    next: usize,
    ready: VecDeque<std::result::Result<Item, ItemFailure>>,
}

impl ItemStream<'_> {
    pub fn pipeline(&self) -> &Pipeline<'_> {
        &self.pipeline
    }
}

impl Iterator for ItemStream<'_> {
    type Item = std::result::Result<Item, ItemFailure>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.ready.is_empty() && self.next < self.pipeline.planned.len() {
            let p = &mut self.pipeline;
            p.trim(p.planned[self.next]);
            let end = (self.next + BATCH).min(p.planned.len());
            let p = &self.pipeline;
            let batch: Vec<_> = p.planned[self.next..end]
                .par_iter()
                .map(|k| {
                    p.build(*k).map_err(|error| ItemFailure {
                        time: p.radar[*k].time,
                        error,
                    })
                })
                .collect();
            self.ready.extend(batch);
            self.next = end;
        }
        self.ready.pop_front()
    }
}
