//! On-disk layer dumps.
//!
//! A dump is a directory holding `manifest.json` and one `NREP` file per layer.
//!
//! `NREP` layout (all integers little-endian):
//!
//! | bytes   | content                                   |
//! |---------|-------------------------------------------|
//! | 0..4    | ASCII `NREP`                              |
//! | 4..8    | version, `u32` = 1                        |
//! | 8..16   | rows, `u64`                               |
//! | 16..24  | cols, `u64`                               |
//! | 24..    | `rows * cols` IEEE-754 binary32, row-major |
//!
//! The manifest is
//!
//! ```json
//! {"version": 1, "model": "m", "dtype": "f32",
//!  "layers": [{"name": "embed", "relative_depth": 0.0,
//!              "file": "layer_000.nrep", "rows": 100, "cols": 2}],
//!  "labels": ["a", "b", ...]}
//! ```
//!
//! `dtype` defaults to `"f32"` when absent; `labels` is optional and shared by
//! every layer (the same samples are traced through all layers).
//!
//! Values are widened to `f64` on read and narrowed back on write, so a
//! read/write round trip reproduces the payload bytes exactly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CloudError, Layer, LayerStack, PointCloud};

pub const MAGIC: &[u8; 4] = b"NREP";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic {found:?}, expected \"NREP\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("refusing to write an empty layer list")]
    EmptyStack,
    #[error("CSV line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DumpError + '_ {
    move |source| DumpError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    pub relative_depth: f64,
    pub file: String,
    pub rows: u64,
    pub cols: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpManifest {
    pub version: u32,
    pub model: String,
    #[serde(default = "default_dtype")]
    pub dtype: String,
    pub layers: Vec<ManifestLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

fn default_dtype() -> String {
    "f32".to_string()
}

/// Encodes one cloud as an `NREP` byte buffer.
pub fn encode_nrep(cloud: &PointCloud) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * cloud.data().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cloud.n_points() as u64).to_le_bytes());
    buf.extend_from_slice(&(cloud.dim() as u64).to_le_bytes());
    for &v in cloud.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

/// Decoded `NREP` payload: `(rows, cols, values)`.
pub fn decode_nrep(bytes: &[u8]) -> Result<(u64, u64, Vec<f32>), DumpError> {
    if bytes.len() < HEADER_LEN {
        return Err(DumpError::TruncatedFile { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[0..4]);
    if &magic != MAGIC {
        return Err(DumpError::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(DumpError::VersionUnsupported(version));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let payload = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| DumpError::ShapeMismatch(format!("{rows}x{cols} overflows")))?;
    let expected = HEADER_LEN as u64 + payload;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(DumpError::TruncatedFile { expected, found });
    }
    if found > expected {
        return Err(DumpError::ShapeMismatch(format!(
            "{} trailing bytes after {rows}x{cols} payload",
            found - expected
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((rows, cols, values))
}

pub fn read_nrep(path: &Path) -> Result<PointCloud, DumpError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let (_, cols, values) = decode_nrep(&bytes)?;
    let data = values.into_iter().map(f64::from).collect();
    Ok(PointCloud::from_flat(cols as usize, data)?)
}

pub fn write_nrep(cloud: &PointCloud, path: &Path) -> Result<(), DumpError> {
    fs::write(path, encode_nrep(cloud)).map_err(io_err(path))
}

pub fn read_manifest(dir: &Path) -> Result<DumpManifest, DumpError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: DumpManifest = serde_json::from_str(&text)?;
    if manifest.version != FORMAT_VERSION {
        return Err(DumpError::VersionUnsupported(manifest.version));
    }
    if manifest.dtype != "f32" {
        return Err(DumpError::UnsupportedDtype(manifest.dtype));
    }
    Ok(manifest)
}

/// Reads a dump directory into a validated [`LayerStack`].
pub fn read_dump(dir: &Path) -> Result<LayerStack, DumpError> {
    let manifest = read_manifest(dir)?;
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let (rows, cols, values) = decode_nrep(&bytes)?;
        if rows != entry.rows || cols != entry.cols {
            return Err(DumpError::ShapeMismatch(format!(
                "{}: manifest says {}x{}, file holds {rows}x{cols}",
                entry.file, entry.rows, entry.cols
            )));
        }
        let mut cloud = PointCloud::from_flat(cols as usize, values.into_iter().map(f64::from).collect())?;
        if let Some(labels) = &manifest.labels {
            cloud = cloud.with_labels(labels.clone())?;
        }
        layers.push(Layer { name: entry.name.clone(), relative_depth: entry.relative_depth, cloud });
    }
    if layers.is_empty() {
        return Err(DumpError::EmptyStack);
    }
    Ok(LayerStack::new(manifest.model, layers)?)
}

/// Writes `manifest.json` plus `layer_<i>.nrep` files into `dir`, creating it if needed.
pub fn write_layers(model: &str, layers: &[Layer], dir: &Path) -> Result<DumpManifest, DumpError> {
    if layers.is_empty() {
        return Err(DumpError::EmptyStack);
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let file = format!("layer_{i:03}.nrep");
        write_nrep(&layer.cloud, &dir.join(&file))?;
        entries.push(ManifestLayer {
            name: layer.name.clone(),
            relative_depth: layer.relative_depth,
            file,
            rows: layer.cloud.n_points() as u64,
            cols: layer.cloud.dim() as u64,
        });
    }
    let manifest = DumpManifest {
        version: FORMAT_VERSION,
        model: model.to_string(),
        dtype: default_dtype(),
        layers: entries,
        labels: layers[0].cloud.labels().map(<[String]>::to_vec),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn write_dump(stack: &LayerStack, dir: &Path) -> Result<DumpManifest, DumpError> {
    write_layers(stack.model(), stack.layers(), dir)
}

/// Parses CSV: one point per line, comma-separated decimal floats. A first
/// line that is not entirely numeric is taken as a header and skipped.
pub fn parse_csv(text: &str) -> Result<PointCloud, DumpError> {
    let mut dim = None;
    let mut data = Vec::new();
    let mut first = true;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if std::mem::take(&mut first) && line.split(',').any(|f| f.trim().parse::<f64>().is_err()) {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| DumpError::Csv {
                line: lineno + 1,
                msg: format!("{field:?}: {e}"),
            })?;
            data.push(v);
            count += 1;
        }
        match dim {
            None => dim = Some(count),
            Some(d) if d != count => {
                return Err(DumpError::Csv {
                    line: lineno + 1,
                    msg: format!("expected {d} fields, found {count}"),
                })
            }
            _ => {}
        }
    }
    let dim = dim.ok_or(DumpError::Csv { line: 0, msg: "no data rows".into() })?;
    Ok(PointCloud::from_flat(dim, data)?)
}

pub fn read_csv(path: &Path) -> Result<PointCloud, DumpError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_csv(&text)
}
