//! Dataset generation and the tools that consume datasets: splits,
//! augmentation, statistics and evaluation.

pub mod augment;
pub mod evaluate;
pub mod index;
pub mod manifest;
pub mod pipeline;
pub mod recording;
pub mod split;
pub mod stats;

use std::path::Path;

use crate::error::Result;
use crate::formats;
use crate::geometry::Timestamp;

pub use index::{read_index, write_index, DatasetInfo, IndexRecord};
pub use manifest::{Manifest, SensorEntry};
pub use pipeline::{Item, ItemFailure, ItemStream, Pipeline, PipelineConfig};
pub use recording::Recording;

/// Fraction of failed items above which a run counts as partial.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerateReport {
    pub items: usize,
    /// Radar scans that could not produce an item (no history or no poses).
    pub skipped: usize,
    pub failures: Vec<(Timestamp, String)>,
}

impl GenerateReport {
    pub fn failure_fraction(&self) -> f64 {
        let attempted = self.items + self.failures.len();
        if attempted == 0 {
            0.0
        } else {
            self.failures.len() as f64 / attempted as f64
        }
    }

    pub fn is_partial(&self) -> bool {
        self.failure_fraction() > MAX_FAILURE_FRACTION
    }
}

/// Runs the pipeline over a recording and materialises every item under
/// `out`. Failed items are logged, listed in `failures.txt` and skipped.
pub fn generate_dataset(rec: &Recording, cfg: PipelineConfig, out: &Path) -> Result<GenerateReport> {
    generate_dataset_with(rec, cfg, out, |_| {})
}

/// [`generate_dataset`], calling `on_item` as soon as each item's files are
/// on disk.
pub fn generate_dataset_with(
    rec: &Recording,
    cfg: PipelineConfig,
    out: &Path,
    mut on_item: impl FnMut(&IndexRecord),
) -> Result<GenerateReport> {
    let pipeline = Pipeline::new(rec, cfg)?;
    let info = DatasetInfo {
        polar: pipeline.polar_geometry(),
        cartesian: pipeline.cartesian_geometry(),
        classes: rec.class_map.target_names().to_vec(),
        config: pipeline.config().clone(),
    };
    info.save(out)?;
    rec.chain.save(&out.join(index::POSES_FILE))?;
    rec.class_map.save(&out.join(index::CLASSES_FILE))?;

    let mut report = GenerateReport {
        skipped: pipeline.skipped(),
        ..Default::default()
    };
    let mut records = Vec::new();
    for outcome in pipeline.stream() {
        let written = outcome.map_err(|f| (f.time, f.error)).and_then(|item| {
            index::write_item(out, &item).map_err(|e| (item.time, e))
        });
        match written {
            Ok(record) => {
                on_item(&record);
                records.push(record);
            }
            Err((t, e)) => {
                log::error!("item {t}: {e}");
                report.failures.push((t, e.to_string()));
            }
        }
    }
    report.items = records.len();
    write_index(&out.join(index::INDEX_FILE), &records)?;
    if !report.failures.is_empty() {
        let text: String = report.failures.iter().map(|(t, e)| format!("{t}\t{e}\n")).collect();
        formats::write_bytes(&out.join("failures.txt"), text.as_bytes())?;
    }
    Ok(report)
}
