//! Dataset directories.
//!
//! ```text
//! geometry.json          grid geometry, class names, generation settings
//! index.jsonl            one record per item
//! poses.csv, classes.csv copies from the recording
//! stacks/<id>.bin        3-channel Cartesian power, oldest scan first
//! labels/<id>.png        Cartesian label grid
//! labels_polar/<id>.png  polar label grid
//! truth/<id>.png         reference polar grid, when the recording has one
//! ```
//!
//! Item ids are the newest radar scan's timestamp in microseconds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::grid::CartesianGeometry;
use crate::sensors::PolarGeometry;

use super::augment::Flips;
use super::pipeline::{Item, PipelineConfig};

pub const INDEX_FILE: &str = "index.jsonl";
pub const INFO_FILE: &str = "geometry.json";
pub const POSES_FILE: &str = "poses.csv";
pub const CLASSES_FILE: &str = "classes.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub id: String,
    pub time: i64,
    /// Radar scans in the stack, oldest first.
    pub scan_times: [i64; 3],
    /// World x, y of the radar at `time`.
    pub ego: [f64; 2],
    pub stack: String,
    pub label: String,
    pub label_polar: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    #[serde(default)]
    pub split: Option<String>,
    /// Set on augmented copies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flips: Option<Flips>,
}

/// Which label grids a tool reads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    Cartesian,
    Polar,
}

impl Layout {
    pub fn label_path<'a>(&self, rec: &'a IndexRecord) -> &'a str {
        match self {
            Layout::Cartesian => &rec.label,
            Layout::Polar => &rec.label_polar,
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(Layout::Cartesian),
            "polar" => Ok(Layout::Polar),
            other => Err(Error::invalid(format!("unknown layout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub polar: PolarGeometry,
    pub cartesian: CartesianGeometry,
    pub classes: Vec<String>,
    pub config: PipelineConfig,
}

impl DatasetInfo {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(INFO_FILE);
        serde_json::from_slice(&formats::read_bytes(&path)?).map_err(|e| Error::format(&path, e))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        text.push('\n');
        formats::write_bytes(&dir.join(INFO_FILE), text.as_bytes())
    }
}

pub fn read_index(path: &Path) -> Result<Vec<IndexRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn write_index(path: &Path, records: &[IndexRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::invalid(e.to_string()))?;
        out.push(b'\n');
    }
    formats::write_bytes(path, &out)
}

/// Writes one item's files under `dir` and returns its index record.
pub fn write_item(dir: &Path, item: &Item) -> Result<IndexRecord> {
    let id = item.time.0.to_string();
    let rel = |sub: &str, ext: &str| format!("{sub}/{id}.{ext}");
    let record = IndexRecord {
        stack: rel("stacks", "bin"),
        label: rel("labels", "png"),
        label_polar: rel("labels_polar", "png"),
        truth: item.truth.as_ref().map(|_| rel("truth", "png")),
        time: item.time.0,
        scan_times: item.stack.times.map(|t| t.0),
        ego: item.ego,
        split: None,
        flips: None,
        id,
    };
    formats::write_stack(&dir.join(&record.stack), &item.stack)?;
    formats::write_label_png(&dir.join(&record.label), &item.cartesian.labels)?;
    formats::write_label_png(&dir.join(&record.label_polar), &item.polar.labels)?;
    if let (Some(truth), Some(p)) = (&item.truth, &record.truth) {
        formats::write_label_png(&dir.join(p), &truth.labels)?;
    }
    Ok(record)
}
