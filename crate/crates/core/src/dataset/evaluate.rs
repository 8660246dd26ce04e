//! Confusion matrices of predicted against target label grids.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::grid::GridGeometry;
use crate::taxonomy::EMPTY;

/// Default radius of the foreshortened horizon.
pub const DEFAULT_HORIZON_M: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub num_classes: usize,
    pub geometry: GridGeometry,
    /// Radius of the second, foreshortened matrix; `None` skips it.
    pub horizon_m: Option<f64>,
    /// Also score cells whose target is Empty.
    pub include_empty: bool,
}

/// Counts indexed `[target][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(num_classes: usize) -> Self {
        Confusion {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn add(&mut self, target: u8, prediction: u8) {
        self.counts[target as usize][prediction as usize] += 1;
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (c, v) in row.iter_mut().zip(o) {
                *c += v;
            }
        }
    }

    pub fn support(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Rows divided by their support; `None` for rows with no support.
    pub fn normalized(&self) -> Vec<Option<Vec<f64>>> {
        self.counts
            .iter()
            .map(|row| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row.iter().map(|c| *c as f64 / n as f64).collect())
            })
            .collect()
    }

    /// Diagonal of the normalised matrix.
    pub fn class_accuracy(&self) -> Vec<Option<f64>> {
        self.normalized()
            .iter()
            .enumerate()
            .map(|(i, row)| row.as_ref().map(|r| r[i]))
            .collect()
    }

    pub fn overall_accuracy(&self) -> Option<f64> {
        let total: u64 = self.support().iter().sum();
        let hits: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        (total > 0).then(|| hits as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub counts: Vec<Vec<u64>>,
    pub normalized: Vec<Option<Vec<f64>>>,
    pub support: Vec<u64>,
    pub class_accuracy: Vec<Option<f64>>,
    pub overall_accuracy: Option<f64>,
}

impl From<&Confusion> for MatrixReport {
    fn from(c: &Confusion) -> Self {
        MatrixReport {
            counts: c.counts.clone(),
            normalized: c.normalized(),
            support: c.support(),
            class_accuracy: c.class_accuracy(),
            overall_accuracy: c.overall_accuracy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub items: usize,
    pub include_empty: bool,
    pub full: MatrixReport,
    pub horizon_m: Option<f64>,
    pub horizon: Option<MatrixReport>,
}

/// Distance from the sensor of every cell centre.
fn cell_ranges(geometry: &GridGeometry, dim: (usize, usize)) -> Result<Array2<f64>> {
    match geometry {
        GridGeometry::Polar(p) => {
            if dim != (p.azimuths, p.range_bins) {
                return Err(Error::invalid(format!("grid {dim:?} does not match polar geometry")));
            }
            Ok(Array2::from_shape_fn(dim, |(_, r)| (r as f64 + 0.5) * p.range_resolution))
        }
        GridGeometry::Cartesian(c) => {
            if dim != (c.size, c.size) {
                return Err(Error::invalid(format!("grid {dim:?} does not match Cartesian geometry")));
            }
            Ok(Array2::from_shape_fn(dim, |(row, col)| {
                let (x, y) = c.pixel_centre(row, col);
                x.hypot(y)
            }))
        }
    }
}

/// Adds one grid pair to the full matrix and, for cells nearer than the
/// horizon, to the horizon matrix.
pub fn score(
    target: &Array2<u8>,
    prediction: &Array2<u8>,
    opts: &EvalOptions,
    full: &mut Confusion,
    horizon: &mut Confusion,
) -> Result<()> {
    if target.dim() != prediction.dim() {
        return Err(Error::invalid(format!(
            "prediction {:?} and target {:?} differ in shape",
            prediction.dim(),
            target.dim()
        )));
    }
    let ranges = cell_ranges(&opts.geometry, target.dim())?;
    let limit = opts.horizon_m.unwrap_or(f64::INFINITY);
    for ((t, p), r) in target.iter().zip(prediction).zip(&ranges) {
        let l = opts.num_classes as u8;
        if *t >= l || *p >= l {
            return Err(Error::invalid(format!("label {} outside {} classes", (*t).max(*p), l)));
        }
        if *t == EMPTY && !opts.include_empty {
            continue;
        }
        full.add(*t, *p);
        if *r < limit {
            horizon.add(*t, *p);
        }
    }
    Ok(())
}

/// Scores every `*.png` in `targets` against the same-named file in
/// `predictions`.
pub fn evaluate_dirs(predictions: &Path, targets: &Path, classes: &[String], opts: &EvalOptions) -> Result<EvalReport> {
    if classes.len() != opts.num_classes {
        return Err(Error::invalid("class names do not match the class count"));
    }
    let mut names: Vec<_> = std::fs::read_dir(targets)
        .map_err(|e| Error::io(targets, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .filter(|n| Path::new(n).extension().is_some_and(|x| x == "png"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::invalid(format!("no label grids in {}", targets.display())));
    }
    let missing: Vec<_> = names.iter().filter(|n| !predictions.join(n).is_file()).collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "{} of {} targets have no prediction, first {:?}",
            missing.len(),
            names.len(),
            missing[0]
        )));
    }
    let mut full = Confusion::new(opts.num_classes);
    let mut horizon = Confusion::new(opts.num_classes);
    for n in &names {
        let t = formats::read_label_png(&targets.join(n))?;
        let p = formats::read_label_png(&predictions.join(n))?;
        score(&t, &p, opts, &mut full, &mut horizon).map_err(|e| Error::format(predictions.join(n), e))?;
    }
    Ok(EvalReport {
        classes: classes.to_vec(),
        items: names.len(),
        include_empty: opts.include_empty,
        full: (&full).into(),
        horizon_m: opts.horizon_m,
        horizon: opts.horizon_m.map(|_| (&horizon).into()),
    })
}
