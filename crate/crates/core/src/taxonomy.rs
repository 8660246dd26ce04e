//! Source-to-radar class remapping and logarithmic class weighting.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Cityscapes label ids 0..=33 and their names.
pub const CITYSCAPES: [&str; 34] = [
    "unlabeled",
    "ego vehicle",
    "rectification border",
    "out of roi",
    "static",
    "dynamic",
    "ground",
    "road",
    "sidewalk",
    "parking",
    "rail track",
    "building",
    "wall",
    "fence",
    "guard rail",
    "bridge",
    "tunnel",
    "pole",
    "polegroup",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "caravan",
    "trailer",
    "train",
    "motorcycle",
    "bicycle",
];

/// Source ids used throughout the synthetic world.
pub mod source {
    pub const ROAD: u8 = 7;
    pub const SIDEWALK: u8 = 8;
    pub const BUILDING: u8 = 11;
    pub const WALL: u8 = 12;
    pub const FENCE: u8 = 13;
    pub const POLE: u8 = 17;
    pub const TRAFFIC_SIGN: u8 = 20;
    pub const VEGETATION: u8 = 21;
    pub const SKY: u8 = 23;
    pub const PERSON: u8 = 24;
    pub const RIDER: u8 = 25;
    pub const CAR: u8 = 26;
    pub const BUS: u8 = 28;
    pub const BICYCLE: u8 = 33;
}

/// Radar target classes.
pub const EMPTY: u8 = 0;
pub const CONSTRUCTION: u8 = 1;
pub const POLE_LIKE: u8 = 2;
pub const PEDESTRIAN: u8 = 3;
pub const VEHICLE: u8 = 4;
pub const BIKE_LIKE: u8 = 5;
pub const VEGETATION: u8 = 6;

pub const TARGET_NAMES: [&str; 7] = [
    "Empty",
    "Construction",
    "Pole-like",
    "Pedestrian",
    "Vehicle",
    "Bike-like",
    "Vegetation",
];

/// Total map from source ids onto target ids. `None` marks an omitted source class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    source_names: Vec<String>,
    mapping: Vec<Option<u8>>,
    target_names: Vec<String>,
}

type ClassRow = (usize, String, Option<(usize, String)>);

impl ClassMap {
    pub fn new(
        source_names: Vec<String>,
        mapping: Vec<Option<u8>>,
        target_names: Vec<String>,
    ) -> Result<Self> {
        if source_names.len() != mapping.len() {
            return Err(Error::invalid("class map needs one entry per source id"));
        }
        if source_names.len() > 255 {
            return Err(Error::invalid("source taxonomy must fit below the unlabeled sentinel"));
        }
        let l = target_names.len();
        if l == 0 || l > 255 {
            return Err(Error::invalid("target taxonomy must have 1..=255 classes"));
        }
        if let Some(bad) = mapping.iter().flatten().find(|t| **t as usize >= l) {
            return Err(Error::invalid(format!("target id {bad} out of range")));
        }
        for target in 1..l as u8 {
            if !mapping.contains(&Some(target)) {
                return Err(Error::invalid(format!(
                    "target class {target} ({}) is never produced",
                    target_names[target as usize]
                )));
            }
        }
        Ok(ClassMap {
            source_names,
            mapping,
            target_names,
        })
    }

    pub fn num_targets(&self) -> usize {
        self.target_names.len()
    }

    pub fn num_sources(&self) -> usize {
        self.mapping.len()
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn source_name(&self, id: u8) -> Option<&str> {
        self.source_names.get(id as usize).map(String::as_str)
    }

    /// Target class of a source id. Unknown ids and the unlabeled sentinel give `None`.
    pub fn map(&self, source: u8) -> Option<u8> {
        self.mapping.get(source as usize).copied().flatten()
    }

    /// Target class of a source id, folding omitted and unknown ids into Empty.
    pub fn map_or_empty(&self, source: u8) -> u8 {
        self.map(source).unwrap_or(EMPTY)
    }

    pub fn remap_image(&self, labels: &ndarray::Array2<u8>) -> ndarray::Array2<u8> {
        labels.mapv(|l| self.map_or_empty(l))
    }

    /// Writes `source_id,source_name,target_id,target_name` rows; omitted ids get `-`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        w.write_record(["source_id", "source_name", "target_id", "target_name"])
            .map_err(|e| Error::format(path, e))?;
        for (id, (name, target)) in self.source_names.iter().zip(&self.mapping).enumerate() {
            let (tid, tname) = match target {
                Some(t) => (t.to_string(), self.target_names[*t as usize].clone()),
                None => ("-".to_string(), "-".to_string()),
            };
            w.write_record([id.to_string(), name.clone(), tid, tname])
                .map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::format(path, e))?;
        // (source id, source name, (target id, target name))
        let mut rows: Vec<ClassRow> = Vec::new();
        for record in r.records() {
            let rec = record.map_err(|e| Error::format(path, e))?;
            if rec.len() != 4 {
                return Err(Error::format(path, "expected 4 columns"));
            }
            let id: usize = rec[0].parse().map_err(|e| Error::format(path, e))?;
            let target = if &rec[2] == "-" {
                None
            } else {
                let t: usize = rec[2].parse().map_err(|e| Error::format(path, e))?;
                Some((t, rec[3].to_string()))
            };
            rows.push((id, rec[1].to_string(), target));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::format(path, "source ids must be 0..n without gaps"));
        }
        let l = rows.iter().filter_map(|r| r.2.as_ref().map(|t| t.0 + 1)).max().unwrap_or(0);
        let mut target_names = vec![String::new(); l];
        for (_, _, t) in &rows {
            if let Some((tid, name)) = t {
                if !target_names[*tid].is_empty() && target_names[*tid] != *name {
                    return Err(Error::format(path, format!("target {tid} has two names")));
                }
                target_names[*tid] = name.clone();
            }
        }
        let mapping = rows.iter().map(|r| r.2.as_ref().map(|t| t.0 as u8)).collect();
        let source_names = rows.into_iter().map(|r| r.1).collect();
        ClassMap::new(source_names, mapping, target_names).map_err(|e| Error::format(path, e))
    }
}

impl Default for ClassMap {
    fn default() -> Self {
        default_class_map()
    }
}

/// The seven-class radar taxonomy over the 34 Cityscapes ids. Every id not
/// listed under an object class is Empty.
pub fn default_class_map() -> ClassMap {
    let mapping = (0..CITYSCAPES.len() as u8)
        .map(|id| {
            Some(match CITYSCAPES[id as usize] {
                "building" | "wall" | "fence" => CONSTRUCTION,
                "pole" | "polegroup" | "traffic light" | "traffic sign" => POLE_LIKE,
                "person" => PEDESTRIAN,
                "car" | "truck" | "bus" | "caravan" | "trailer" | "train" => VEHICLE,
                "rider" | "bicycle" | "motorcycle" => BIKE_LIKE,
                "vegetation" => VEGETATION,
                _ => EMPTY,
            })
        })
        .collect();
    ClassMap::new(
        CITYSCAPES.iter().map(|s| s.to_string()).collect(),
        mapping,
        TARGET_NAMES.iter().map(|s| s.to_string()).collect(),
    )
    .expect("built-in class map is valid")
}

/// Per-class loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights(pub Vec<f64>);

/// Weight given to the Empty class unless overridden.
pub const DEFAULT_EMPTY_WEIGHT: f64 = 0.1;

/// `w[i] = (1 + ln(sum(t) / (N t[i])))^2` with zero counts clamped to 1; when
/// `empty_override` is set, `w[EMPTY]` is replaced by it.
pub fn compute_weights(counts: &[u64], empty_override: Option<f64>) -> Result<ClassWeights> {
    if counts.is_empty() || counts.iter().all(|c| *c == 0) {
        return Err(Error::DegenerateCounts);
    }
    let clamped: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if *c == 0 {
                log::warn!("class {i} has no samples; clamping its count to 1");
                1.0
            } else {
                *c as f64
            }
        })
        .collect();
    let n = clamped.len() as f64;
    let total: f64 = clamped.iter().sum();
    let mut w: Vec<f64> = clamped
        .iter()
        .map(|t| (1.0 + (total / (n * t)).ln()).powi(2))
        .collect();
    if let Some(o) = empty_override {
        w[EMPTY as usize] = o;
    }
    Ok(ClassWeights(w))
}

impl ClassWeights {
    /// Writes `target_id,weight` rows.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::from("target_id,weight\n");
        for (i, w) in self.0.iter().enumerate() {
            text.push_str(&format!("{i},{w}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::format(path, e))?;
        let mut out = Vec::new();
        for (i, record) in r.records().enumerate() {
            let rec = record.map_err(|e| Error::format(path, e))?;
            let id: usize = rec.get(0).unwrap_or("").parse().map_err(|e| Error::format(path, e))?;
            if id != i {
                return Err(Error::format(path, "target ids must be consecutive from 0"));
            }
            out.push(rec.get(1).unwrap_or("").parse().map_err(|e| Error::format(path, e))?);
        }
        Ok(ClassWeights(out))
    }
}
