//! Raw volume files: `<name>.raw` payload with a `<name>.json` header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::{Lattice, ScalarField3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByteOrder {
    Little,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub dtype: Dtype,
    pub byte_order: ByteOrder,
}

impl VolumeHeader {
    pub fn payload_bytes(&self) -> usize {
        self.dims.iter().product::<usize>() * self.dtype.size()
    }
}

/// `<stem>.raw` and `<stem>.json` for any of `stem`, `stem.raw`, `stem.json`.
pub fn volume_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("raw") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut raw = stem.clone().into_os_string();
    raw.push(".raw");
    let mut json = stem.into_os_string();
    json.push(".json");
    (raw.into(), json.into())
}

pub fn read_header(path: &Path) -> Result<VolumeHeader> {
    let (_, json) = volume_paths(path);
    let text = match fs::read_to_string(&json) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::format(&json, "missing header sidecar"))
        }
        Err(e) => return Err(e.into()),
    };
    serde_json::from_str(&text).map_err(|e| Error::format(&json, format!("bad header: {e}")))
}

/// Load a volume; `u8` payloads are scaled to `[0, 1]`.
pub fn load_volume(path: &Path) -> Result<ScalarField3> {
    let header = read_header(path)?;
    let (raw, json) = volume_paths(path);
    let lattice = Lattice::new(header.dims, header.spacing, header.origin)
        .map_err(|e| Error::format(&json, e.to_string()))?;
    let bytes = fs::read(&raw)?;
    let expected = header.payload_bytes();
    if bytes.len() != expected {
        return Err(Error::format(
            &raw,
            format!(
                "size mismatch: expected {expected} bytes, found {} (payload ends at byte offset {})",
                bytes.len(),
                bytes.len().min(expected)
            ),
        ));
    }
    let values: Vec<f64> = match header.dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::U8 => bytes.iter().map(|&b| b as f64 / 255.0).collect(),
    };
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            &raw,
            format!("non-finite sample at byte offset {}", pos * header.dtype.size()),
        ));
    }
    ScalarField3::new(lattice, values)
}

/// Save as little-endian `f32`.
pub fn save_volume(field: &ScalarField3, path: &Path) -> Result<()> {
    let (raw, json) = volume_paths(path);
    let lat = &field.lattice;
    let header = VolumeHeader {
        dims: lat.dims,
        spacing: lat.spacing,
        origin: lat.origin,
        dtype: Dtype::F32,
        byte_order: ByteOrder::Little,
    };
    let mut bytes = Vec::with_capacity(header.payload_bytes());
    for v in &field.values {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    if let Some(dir) = raw.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&raw, bytes)?;
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&json, text + "\n")?;
    Ok(())
}
