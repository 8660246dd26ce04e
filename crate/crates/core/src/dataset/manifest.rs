//! Recording manifests.
//!
//! One artifact per line, four whitespace-separated columns:
//! `kind frame timestamp path`, with `-` for columns that do not apply.
//! Paths are relative to the manifest's directory.
//!
//! ```text
//! poses  radar      -                 poses.csv
//! rig    -          -                 rig.txt
//! camera cam_front  -                 cameras/cam_front.txt
//! image  cam_front  1547120000040000  images/cam_front/1547120000040000.png
//! lidar  lidar_left 1547120000005000  lidar/lidar_left/1547120000005000.bin
//! radar  radar      1547120000012000  radar/1547120000012000.bin
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{FrameId, Timestamp};

/// A timestamped sensor file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SensorEntry {
    pub time: Timestamp,
    pub frame: FrameId,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub root: PathBuf,
    pub poses: Option<(FrameId, PathBuf)>,
    pub rig: Option<PathBuf>,
    pub class_map: Option<PathBuf>,
    pub cameras: BTreeMap<FrameId, PathBuf>,
    pub images: Vec<SensorEntry>,
    pub lidar: Vec<SensorEntry>,
    pub radar: Vec<SensorEntry>,
    /// Reference radar-frame label grids, when the recording has them.
    pub truth: Vec<SensorEntry>,
}

fn column(value: &str) -> Option<&str> {
    (value != "-").then_some(value)
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Manifest {
            root: root.into(),
            ..Default::default()
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut m = Manifest::new(root);
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(Error::format(path, format!("line {lineno}: expected 4 columns, found {}", cols.len())));
            }
            let frame = column(cols[1])
                .map(FrameId::new)
                .transpose()
                .map_err(|e| Error::format(path, format!("line {lineno}: {e}")))?;
            let time = column(cols[2])
                .map(|t| t.parse::<i64>().map(Timestamp))
                .transpose()
                .map_err(|e| Error::format(path, format!("line {lineno}: bad timestamp: {e}")))?;
            let file = PathBuf::from(cols[3]);
            let need_frame = || frame.clone().ok_or_else(|| Error::format(path, format!("line {lineno}: `{}` needs a frame", cols[0])));
            let sensor = |list: &mut Vec<SensorEntry>| -> Result<()> {
                let frame = need_frame()?;
                let time = time.ok_or_else(|| Error::format(path, format!("line {lineno}: `{}` needs a timestamp", cols[0])))?;
                list.push(SensorEntry {
                    time,
                    frame,
                    path: file.clone(),
                });
                Ok(())
            };
            match cols[0] {
                "poses" => m.poses = Some((frame.unwrap_or_else(FrameId::radar), file)),
                "rig" => m.rig = Some(file),
                "classes" => m.class_map = Some(file),
                "camera" => {
                    m.cameras.insert(need_frame()?, file);
                }
                "image" => sensor(&mut m.images)?,
                "lidar" => sensor(&mut m.lidar)?,
                "radar" => sensor(&mut m.radar)?,
                "truth" => sensor(&mut m.truth)?,
                other => return Err(Error::format(path, format!("line {lineno}: unknown kind `{other}`"))),
            }
        }
        for list in [&mut m.images, &mut m.lidar, &mut m.radar, &mut m.truth] {
            list.sort();
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |kind: &str, frame: Option<&FrameId>, time: Option<Timestamp>, path: &Path| {
            out.push_str(&format!(
                "{kind} {} {} {}\n",
                frame.map_or("-", |f| f.as_str()),
                time.map_or("-".to_string(), |t| t.0.to_string()),
                path.display()
            ));
        };
        if let Some((frame, p)) = &self.poses {
            line("poses", Some(frame), None, p);
        }
        if let Some(p) = &self.rig {
            line("rig", None, None, p);
        }
        if let Some(p) = &self.class_map {
            line("classes", None, None, p);
        }
        for (frame, p) in &self.cameras {
            line("camera", Some(frame), None, p);
        }
        for (kind, list) in [("image", &self.images), ("lidar", &self.lidar), ("radar", &self.radar), ("truth", &self.truth)] {
            let mut sorted: Vec<&SensorEntry> = list.iter().collect();
            sorted.sort();
            for e in sorted {
                line(kind, Some(&e.frame), Some(e.time), &e.path);
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::formats::write_bytes(path, self.to_text().as_bytes())
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }
}
