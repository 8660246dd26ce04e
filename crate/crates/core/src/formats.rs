//! On-disk formats.
//!
//! * key-value text: `key = value` lines, `#` comments.
//! * LiDAR scan: `u32` little-endian point count, then `f32` x, y, z triples.
//! * Labelled cloud: `u32` count, then records of `f32` x, y, z and a `u8` label.
//! * Float grids (radar scans, stacks): a text header closed by an
//!   `end_header` line, followed by row-major little-endian `f32` values,
//!   one block per channel.
//! * Label grids and semantic images: 8-bit greyscale PNG of class indices.

use std::collections::BTreeMap;
use std::io::{Cursor, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{FrameId, Timestamp, Vec3};
use crate::grid::{CartesianGeometry, RadarStack};
use crate::sensors::{LidarScan, RadarScan};

const GRID_MAGIC: &str = "radar-annotate float grid";

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}

/// Parsed `key = value` text.
#[derive(Debug, Clone)]
pub struct KeyValues {
    path: std::path::PathBuf,
    values: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(path, format!("line {}: expected `key = value`", lineno + 1))
            })?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KeyValues {
            path: path.to_path_buf(),
            values,
        })
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::format(&self.path, format!("missing key `{key}`")))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(key)?;
        raw.parse()
            .map_err(|e| Error::format(&self.path, format!("key `{key}`: {e}")))
    }

    pub fn float(&self, key: &str) -> Result<f64> {
        self.parsed(key)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parsed(key)
    }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, path: &Path) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::format(path, "truncated file"));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn take_u32(bytes: &mut &[u8], path: &Path) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, 4, path)?.try_into().unwrap()))
}

fn take_f32(bytes: &mut &[u8], path: &Path) -> Result<f32> {
    Ok(f32::from_le_bytes(take(bytes, 4, path)?.try_into().unwrap()))
}

pub fn encode_points(points: &[Vec3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 12 * points.len());
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_points(mut bytes: &[u8], path: &Path) -> Result<Vec<Vec3>> {
    let n = take_u32(&mut bytes, path)? as usize;
    if bytes.len() != 12 * n {
        return Err(Error::format(path, format!("expected {n} points, found {} bytes", bytes.len())));
    }
    (0..n)
        .map(|_| {
            let x = take_f32(&mut bytes, path)?;
            let y = take_f32(&mut bytes, path)?;
            let z = take_f32(&mut bytes, path)?;
            Ok(Vec3::new(x as f64, y as f64, z as f64))
        })
        .collect()
}

pub fn write_lidar(path: &Path, scan: &LidarScan) -> Result<()> {
    write_bytes(path, &encode_points(&scan.points))
}

pub fn read_lidar(path: &Path, frame: FrameId, time: Timestamp, rate_hz: f64) -> Result<LidarScan> {
    let points = decode_points(&read_bytes(path)?, path)?;
    LidarScan::new(points, frame, time, rate_hz).map_err(|e| Error::format(path, e))
}

pub fn encode_labelled(points: &[Vec3], labels: &[u8]) -> Vec<u8> {
    assert_eq!(points.len(), labels.len());
    let mut out = Vec::with_capacity(4 + 13 * points.len());
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for (p, l) in points.iter().zip(labels) {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        out.push(*l);
    }
    out
}

pub fn decode_labelled(mut bytes: &[u8], path: &Path) -> Result<(Vec<Vec3>, Vec<u8>)> {
    let n = take_u32(&mut bytes, path)? as usize;
    if bytes.len() != 13 * n {
        return Err(Error::format(path, format!("expected {n} records, found {} bytes", bytes.len())));
    }
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = take_f32(&mut bytes, path)?;
        let y = take_f32(&mut bytes, path)?;
        let z = take_f32(&mut bytes, path)?;
        points.push(Vec3::new(x as f64, y as f64, z as f64));
        labels.push(take(&mut bytes, 1, path)?[0]);
    }
    Ok((points, labels))
}

/// Serialises a float grid with extra header fields.
pub fn encode_float_grid(grid: &Array2<f32>, extra: &[(&str, String)]) -> Vec<u8> {
    encode_float_channels(std::slice::from_ref(grid), extra)
}

/// Serialises equally sized grids back to back. A `channels` header field is
/// written when there is more than one.
pub fn encode_float_channels(grids: &[Array2<f32>], extra: &[(&str, String)]) -> Vec<u8> {
    let (rows, cols) = grids.first().map_or((0, 0), |g| g.dim());
    assert!(grids.iter().all(|g| g.dim() == (rows, cols)), "channels differ in shape");
    let mut header = format!("{GRID_MAGIC}\nrows = {rows}\ncols = {cols}\n");
    if grids.len() != 1 {
        header.push_str(&format!("channels = {}\n", grids.len()));
    }
    for (k, v) in extra {
        header.push_str(&format!("{k} = {v}\n"));
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    out.reserve(4 * rows * cols * grids.len());
    for v in grids.iter().flat_map(|g| g.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_float_grid(bytes: &[u8], path: &Path) -> Result<(Array2<f32>, KeyValues)> {
    let (mut grids, kv) = decode_float_channels(bytes, path)?;
    if grids.len() != 1 {
        return Err(Error::format(path, format!("expected one channel, found {}", grids.len())));
    }
    Ok((grids.remove(0), kv))
}

pub fn decode_float_channels(bytes: &[u8], path: &Path) -> Result<(Vec<Array2<f32>>, KeyValues)> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::format(path, "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|e| Error::format(path, e))?;
    let (magic, body) = header.split_once('\n').unwrap_or((header, ""));
    if magic != GRID_MAGIC {
        return Err(Error::format(path, "not a float grid file"));
    }
    let kv = KeyValues::parse(body, path)?;
    let rows = kv.usize("rows")?;
    let cols = kv.usize("cols")?;
    let channels = if kv.has("channels") { kv.usize("channels")? } else { 1 };
    let mut data = &bytes[end + END.len()..];
    if data.len() != 4 * rows * cols * channels {
        return Err(Error::format(path, format!("expected {channels}x{rows}x{cols} floats")));
    }
    let grids = (0..channels)
        .map(|_| {
            let values = (0..rows * cols)
                .map(|_| take_f32(&mut data, path))
                .collect::<Result<Vec<_>>>()?;
            Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::format(path, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((grids, kv))
}

/// Writes a stack as a three-channel float grid, oldest channel first.
pub fn write_stack(path: &Path, stack: &RadarStack) -> Result<()> {
    let times = stack.times.iter().map(|t| t.0.to_string()).collect::<Vec<_>>().join(" ");
    let bytes = encode_float_channels(
        &stack.channels,
        &[
            ("metres_per_pixel", stack.geometry.metres_per_pixel.to_string()),
            ("scan_times", times),
        ],
    );
    write_bytes(path, &bytes)
}

pub fn read_stack(path: &Path) -> Result<RadarStack> {
    let (grids, kv) = decode_float_channels(&read_bytes(path)?, path)?;
    let times = kv
        .str("scan_times")?
        .split_whitespace()
        .map(|s| s.parse::<i64>().map(Timestamp))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, e))?;
    let channels: [Array2<f32>; 3] = grids
        .try_into()
        .map_err(|g: Vec<_>| Error::format(path, format!("expected 3 channels, found {}", g.len())))?;
    let times: [Timestamp; 3] = times
        .try_into()
        .map_err(|_| Error::format(path, "expected 3 scan times"))?;
    let (rows, cols) = channels[0].dim();
    if rows != cols {
        return Err(Error::format(path, "stack channels must be square"));
    }
    let geometry = CartesianGeometry::new(rows, kv.float("metres_per_pixel")?).map_err(|e| Error::format(path, e))?;
    Ok(RadarStack {
        channels,
        geometry,
        times,
    })
}

pub fn write_radar(path: &Path, scan: &RadarScan) -> Result<()> {
    let times = scan
        .azimuth_times
        .iter()
        .map(|t| t.0.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let bytes = encode_float_grid(
        &scan.power,
        &[
            ("range_resolution", scan.range_resolution.to_string()),
            ("frame", scan.frame.to_string()),
            ("scan_time", scan.scan_time.0.to_string()),
            ("rate", scan.rate_hz.to_string()),
            ("azimuth_times", times),
        ],
    );
    write_bytes(path, &bytes)
}

pub fn read_radar(path: &Path) -> Result<RadarScan> {
    let (power, kv) = decode_float_grid(&read_bytes(path)?, path)?;
    let times = kv
        .str("azimuth_times")?
        .split_whitespace()
        .map(|s| s.parse::<i64>().map(Timestamp))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, e))?;
    RadarScan::new(
        power,
        times,
        kv.float("range_resolution")?,
        FrameId::new(kv.str("frame")?).map_err(|e| Error::format(path, e))?,
        Timestamp(kv.parsed("scan_time")?),
        kv.float("rate")?,
    )
    .map_err(|e| Error::format(path, e))
}

pub fn encode_label_png(labels: &Array2<u8>) -> Vec<u8> {
    let (h, w) = labels.dim();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        let data: Vec<u8> = labels.iter().copied().collect();
        writer.write_image_data(&data).expect("in-memory PNG body");
    }
    out
}

pub fn decode_label_png(bytes: &[u8], path: &Path) -> Result<Array2<u8>> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(path, "label PNG must be 8-bit greyscale"));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(w * h)];
    reader.next_frame(&mut buf).map_err(|e| Error::format(path, e))?;
    buf.truncate(w * h);
    Array2::from_shape_vec((h, w), buf).map_err(|e| Error::format(path, e))
}

pub fn write_label_png(path: &Path, labels: &Array2<u8>) -> Result<()> {
    write_bytes(path, &encode_label_png(labels))
}

pub fn read_label_png(path: &Path) -> Result<Array2<u8>> {
    decode_label_png(&read_bytes(path)?, path)
}
