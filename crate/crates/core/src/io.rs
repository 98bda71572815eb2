//! Edge-map files and dataset manifests.
//!
//! Two map formats are supported:
//!
//! * binary PGM (`P5`, maxval 255): confidences are `byte / 255`; writing
//!   rounds `v * 255` half-up. Binary maps are written as `{0, 255}`.
//! * EMAP, a lossless float container: the ASCII magic `EMAP`, width and
//!   height as little-endian `u32`, then `width * height` little-endian
//!   IEEE-754 `f32` values in row-major order.
//!
//! A manifest is a UTF-8 tab-separated file with one image per line: an
//! optional `id=<name>` field, the prediction path, then one or more
//! ground-truth paths. Blank lines and lines starting with `#` are ignored.
//! Relative paths are resolved against the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{BinaryMap, ConfidenceMap};

const EMAP_MAGIC: &[u8; 4] = b"EMAP";
const EMAP_HEADER: usize = 12;
/// Slack allowed on EMAP values before they are rejected as out of range.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Pgm,
    Emap,
}

impl MapFormat {
    /// `.pgm` / `.emap` by extension, case-insensitively.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(Self::Pgm),
            "emap" => Some(Self::Emap),
            _ => None,
        }
    }
}

/// Decodes a PGM or EMAP byte buffer, choosing the format by magic bytes.
pub fn decode_map(bytes: &[u8]) -> Result<ConfidenceMap> {
    if bytes.starts_with(EMAP_MAGIC) {
        decode_emap(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(Error::Format("unrecognised magic bytes".into()))
    }
}

pub fn read_map(path: impl AsRef<Path>) -> Result<ConfidenceMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_map(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Reads a ground-truth map; any nonzero pixel is an edge.
pub fn read_binary_map(path: impl AsRef<Path>) -> Result<BinaryMap> {
    let map = read_map(path)?;
    let (w, h) = map.dims();
    BinaryMap::new(w, h, map.values().iter().map(|&v| v > 0.0).collect())
}

fn decode_emap(bytes: &[u8]) -> Result<ConfidenceMap> {
    if bytes.len() < EMAP_HEADER {
        return Err(Error::Format("EMAP header is truncated".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    if w == 0 || h == 0 {
        return Err(Error::Format(format!("EMAP has empty dimensions {w}x{h}")));
    }
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("EMAP dimensions overflow".into()))?;
    let payload = &bytes[EMAP_HEADER..];
    if payload.len() < expected {
        return Err(Error::Format(format!(
            "EMAP payload is truncated: {} of {expected} bytes",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "EMAP has {} trailing bytes",
            payload.len() - expected
        )));
    }
    let mut values = Vec::with_capacity(w * h);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f64::from(f32::from_le_bytes(chunk.try_into().unwrap()));
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
            return Err(Error::Validation(format!(
                "EMAP value {v} at index {i} is outside [0, 1]"
            )));
        }
        values.push(v.clamp(0.0, 1.0));
    }
    ConfidenceMap::new(w, h, values)
}

/// Splits the PGM header into tokens, skipping `#` comments. Returns the
/// tokens and the offset just past the single whitespace byte that ends the
/// header.
fn pgm_header(bytes: &[u8]) -> Result<([usize; 3], usize)> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Format("PGM header is truncated".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("PGM header field is not a number".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Format("PGM header field is too large".into()))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok((fields, pos + 1)),
        _ => Err(Error::Format(
            "PGM header is not terminated by whitespace".into(),
        )),
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<ConfidenceMap> {
    let ([w, h, maxval], start) = pgm_header(bytes)?;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "PGM maxval {maxval} is not supported (expected 255)"
        )));
    }
    if w == 0 || h == 0 {
        return Err(Error::Format(format!("PGM has empty dimensions {w}x{h}")));
    }
    let n = w
        .checked_mul(h)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
    let payload = &bytes[start..];
    if payload.len() < n {
        return Err(Error::Format(format!(
            "PGM payload is truncated: {} of {n} bytes",
            payload.len()
        )));
    }
    let values = payload[..n].iter().map(|&b| f64::from(b) / 255.0).collect();
    ConfidenceMap::new(w, h, values)
}

/// `round(v * 255)` with halves rounded up.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(width: usize, height: usize, bytes: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    out
}

/// EMAP encoding of an arbitrary finite grid (values are not range-checked,
/// so gradients can be stored too).
pub fn encode_emap(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMAP_HEADER + 4 * values.len());
    out.extend_from_slice(EMAP_MAGIC);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Anything that can be written as a map file.
pub trait MapData {
    fn dims(&self) -> (usize, usize);
    fn pgm_bytes(&self) -> Vec<u8>;
    fn float_values(&self) -> Vec<f64>;
}

impl MapData for ConfidenceMap {
    fn dims(&self) -> (usize, usize) {
        ConfidenceMap::dims(self)
    }
    fn pgm_bytes(&self) -> Vec<u8> {
        self.values().iter().map(|&v| quantize(v)).collect()
    }
    fn float_values(&self) -> Vec<f64> {
        self.values().to_vec()
    }
}

impl MapData for BinaryMap {
    fn dims(&self) -> (usize, usize) {
        BinaryMap::dims(self)
    }
    fn pgm_bytes(&self) -> Vec<u8> {
        self.bits()
            .iter()
            .map(|&b| if b { 255 } else { 0 })
            .collect()
    }
    fn float_values(&self) -> Vec<f64> {
        self.bits()
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }
}

pub fn encode_map<M: MapData>(map: &M, format: MapFormat) -> Vec<u8> {
    let (w, h) = map.dims();
    match format {
        MapFormat::Pgm => encode_pgm(w, h, &map.pgm_bytes()),
        MapFormat::Emap => encode_emap(w, h, &map.float_values()),
    }
}

pub fn write_map<M: MapData>(map: &M, path: impl AsRef<Path>, format: MapFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_map(map, format)).map_err(|e| Error::io(path, e))
}

/// Writes a raw float grid (e.g. a loss gradient) as EMAP.
pub fn write_emap_raw(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    values: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_emap(width, height, values)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub pred: PathBuf,
    pub gts: Vec<PathBuf>,
    pub id: Option<String>,
}

impl ManifestEntry {
    /// Explicit id, else the prediction file stem.
    pub fn display_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.pred
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

/// Parses manifest text; relative paths are joined onto `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest> {
    let resolve = |field: &str| {
        let p = Path::new(field);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields: Vec<&str> = line.split('\t').collect();
        let id = match fields.first().and_then(|f| f.strip_prefix("id=")) {
            Some(id) => {
                let id = id.to_string();
                fields.remove(0);
                Some(id)
            }
            None => None,
        };
        if let Some(pos) = fields.iter().position(|f| f.trim().is_empty()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("field {} is empty", pos + 1),
            });
        }
        match fields.split_first() {
            Some((pred, gts)) if !gts.is_empty() => entries.push(ManifestEntry {
                pred: resolve(pred),
                gts: gts.iter().map(|g| resolve(g)).collect(),
                id,
            }),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message:
                        "expected a prediction path followed by at least one ground-truth path"
                            .into(),
                })
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Validation("manifest has no entries".into()));
    }
    Ok(Manifest { entries })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        message: format!("manifest is not UTF-8: {e}"),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}
