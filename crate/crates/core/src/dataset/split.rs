//! Spatially separated train/val/test splits.
//!
//! Regions are either world-frame polygons or time ranges of the recording;
//! a time range covers the stretch of road driven during it. Each item is
//! placed by the radar's ego position. Items closer than the padding to the
//! boundary of a polygon region, or to the road of a region belonging to a
//! different split, are dropped.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Timestamp;
use crate::pose_chain::PoseChain;

use super::index::IndexRecord;

pub const DEFAULT_PADDING_M: f64 = 10.0;

fn default_padding() -> f64 {
    DEFAULT_PADDING_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub split: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 2]>>,
    /// Inclusive `[start, end]` in microseconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_range: Option<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_padding")]
    pub padding_m: f64,
    #[serde(rename = "region")]
    pub regions: Vec<Region>,
}

impl SplitConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: SplitConfig = toml::from_str(text).map_err(|e| Error::format(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.padding_m >= 0.0) {
            return Err(Error::invalid("padding_m must be non-negative"));
        }
        if self.regions.is_empty() {
            return Err(Error::invalid("split config has no regions"));
        }
        for r in &self.regions {
            match (&r.polygon, &r.time_range) {
                (Some(poly), None) => {
                    if poly.len() < 3 || poly.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(Error::invalid(format!("region `{}`: polygon needs 3 finite vertices", r.split)));
                    }
                }
                (None, Some([a, b])) => {
                    if a > b {
                        return Err(Error::invalid(format!("region `{}`: time range is reversed", r.split)));
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "region `{}` needs exactly one of `polygon` and `time_range`",
                        r.split
                    )))
                }
            }
        }
        let polygons = self.regions.iter().filter(|r| r.polygon.is_some()).count();
        if polygons != 0 && polygons != self.regions.len() {
            return Err(Error::invalid("regions must all be polygons or all time ranges"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SplitSummary {
    pub counts: BTreeMap<String, usize>,
    /// Inside a region but within the padding of a boundary.
    pub padded_out: usize,
    /// Outside every region.
    pub unassigned: usize,
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - s * dx).hypot(p[1] - a[1] - s * dy)
}

fn polyline_distance(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => segment_distance(p, *only, *only),
        _ => line
            .windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

fn boundary_distance(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    (0..poly.len())
        .map(|i| segment_distance(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Even-odd rule; points on the boundary may land either way.
fn inside(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut odd = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            odd = !odd;
        }
        j = i;
    }
    odd
}

/// Ego positions driven during `[t0, t1]`, clipped to the chain.
fn driven(chain: &PoseChain, [t0, t1]: [i64; 2]) -> Result<Vec<[f64; 2]>> {
    let lo = Timestamp(t0).max(chain.start());
    let hi = Timestamp(t1).min(chain.end());
    if lo > hi {
        return Ok(Vec::new());
    }
    let xy = |t: Timestamp| chain.interpolate(t).map(|p| [p.translation.x, p.translation.y]);
    let mut line = vec![xy(lo)?];
    for (t, pose) in chain.entries() {
        if t > lo && t < hi {
            line.push([pose.translation.x, pose.translation.y]);
        }
    }
    line.push(xy(hi)?);
    Ok(line)
}

enum Shape {
    Polygon(Vec<[f64; 2]>),
    Road { range: [i64; 2], line: Vec<[f64; 2]> },
}

/// Sets each record's `split`, or clears it for dropped items.
///
/// `chain` is needed for time-range regions. The result is verified before
/// returning: every kept item is at least `padding_m` from the boundary of
/// every region it was checked against, and no kept item lies inside a
/// region of another split.
pub fn assign_splits(records: &mut [IndexRecord], cfg: &SplitConfig, chain: Option<&PoseChain>) -> Result<SplitSummary> {
    cfg.validate()?;
    let shapes = cfg
        .regions
        .iter()
        .map(|r| match (&r.polygon, r.time_range) {
            (Some(poly), _) => Ok(Shape::Polygon(poly.clone())),
            (None, Some(range)) => {
                let chain = chain.ok_or_else(|| Error::invalid("time-range regions need the pose chain"))?;
                Ok(Shape::Road {
                    range,
                    line: driven(chain, range)?,
                })
            }
            (None, None) => unreachable!("validated"),
        })
        .collect::<Result<Vec<_>>>()?;

    let pad = cfg.padding_m;
    let mut summary = SplitSummary::default();
    for name in cfg.regions.iter().map(|r| &r.split) {
        summary.counts.entry(name.clone()).or_insert(0);
    }
    for rec in records.iter_mut() {
        let p = rec.ego;
        let home = shapes.iter().position(|s| match s {
            Shape::Polygon(poly) => inside(p, poly) || boundary_distance(p, poly) == 0.0,
            Shape::Road { range, .. } => range[0] <= rec.time && rec.time <= range[1],
        });
        rec.split = None;
        let Some(home) = home else {
            summary.unassigned += 1;
            continue;
        };
        let name = &cfg.regions[home].split;
        let too_close = shapes.iter().zip(&cfg.regions).any(|(s, r)| match s {
            Shape::Polygon(poly) => boundary_distance(p, poly) < pad,
            Shape::Road { line, .. } => &r.split != name && polyline_distance(p, line) < pad,
        });
        if too_close {
            summary.padded_out += 1;
            continue;
        }
        if let Some(other) = shapes.iter().zip(&cfg.regions).find(|(s, r)| {
            &r.split != name
                && match s {
                    Shape::Polygon(poly) => inside(p, poly),
                    Shape::Road { line, .. } => polyline_distance(p, line) == 0.0,
                }
        }) {
            return Err(Error::invalid(format!(
                "item {} lies in regions of both `{name}` and `{}`",
                rec.id, other.1.split
            )));
        }
        rec.split = Some(name.clone());
        *summary.counts.get_mut(name).expect("seeded above") += 1;
    }
    Ok(summary)
}
