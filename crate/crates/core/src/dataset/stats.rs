//! Class frequencies of a dataset's label grids.

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formats;

use super::index::{IndexRecord, Layout};

/// Cells per target class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts(pub Vec<u64>);

impl ClassCounts {
    pub fn new(num_classes: usize) -> Self {
        ClassCounts(vec![0; num_classes])
    }

    pub fn add_grid(&mut self, grid: &Array2<u8>) -> Result<()> {
        let n = self.0.len();
        for l in grid {
            let slot = self
                .0
                .get_mut(*l as usize)
                .ok_or_else(|| Error::invalid(format!("label {l} outside {n} classes")))?;
            *slot += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ClassCounts) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

/// Counts over the records of `split` (all records when `None`).
pub fn count_classes(dir: &Path, records: &[IndexRecord], split: Option<&str>, layout: Layout, num_classes: usize) -> Result<ClassCounts> {
    records
        .par_iter()
        .filter(|r| split.is_none() || r.split.as_deref() == split)
        .map(|r| {
            let path = dir.join(layout.label_path(r));
            let mut c = ClassCounts::new(num_classes);
            c.add_grid(&formats::read_label_png(&path)?).map_err(|e| Error::format(&path, e))?;
            Ok(c)
        })
        .try_reduce(
            || ClassCounts::new(num_classes),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )
}
