//! On-disk artifacts: a JSON header next to a raw little-endian `f64` blob.
//!
//! The header records the blob length and its SHA-256 so truncated or edited blobs are
//! rejected on load. All writes go through a temp file followed by a rename.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobRef {
    pub file: String,
    pub f64_count: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Envelope<H> {
    format: String,
    version: u32,
    blob: BlobRef,
    header: H,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn f64s_to_le_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn le_bytes_to_f64s(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    )
}

/// Writes `bytes` to `path` via a sibling temp file and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Saves `<dir>/<stem>.json` and `<dir>/<stem>.bin`; returns both paths (json first).
pub fn save<H: Serialize>(
    dir: &Path,
    stem: &str,
    format: &str,
    header: &H,
    blob: &[f64],
) -> Result<[PathBuf; 2]> {
    let bin_name = format!("{stem}.bin");
    let bytes = f64s_to_le_bytes(blob);
    let envelope = Envelope {
        format: format.to_string(),
        version: FORMAT_VERSION,
        blob: BlobRef {
            file: bin_name.clone(),
            f64_count: blob.len(),
            sha256: sha256_hex(&bytes),
        },
        header,
    };
    let json_path = dir.join(format!("{stem}.json"));
    let bin_path = dir.join(bin_name);
    let json = to_json_bytes(&envelope)?;
    write_atomic(&bin_path, &bytes)?;
    write_atomic(&json_path, &json)?;
    Ok([json_path, bin_path])
}

/// Reads only the `format` field of an artifact header.
pub fn format_of(json_path: &Path) -> Result<String> {
    #[derive(Deserialize)]
    struct Peek {
        format: String,
    }
    let text = fs::read(json_path).map_err(|e| Error::io(json_path, e))?;
    let peek: Peek = serde_json::from_slice(&text)
        .map_err(|e| Error::artifact(json_path, format!("invalid header: {e}")))?;
    Ok(peek.format)
}

/// Loads an artifact written by [`save`], validating format name, length and checksum.
pub fn load<H: DeserializeOwned>(json_path: &Path, format: &str) -> Result<(H, Vec<f64>)> {
    let text = fs::read(json_path).map_err(|e| Error::io(json_path, e))?;
    let envelope: Envelope<H> = serde_json::from_slice(&text)
        .map_err(|e| Error::artifact(json_path, format!("invalid header: {e}")))?;
    if envelope.format != format {
        return Err(Error::artifact(
            json_path,
            format!("expected format `{format}`, found `{}`", envelope.format),
        ));
    }
    if envelope.version != FORMAT_VERSION {
        return Err(Error::artifact(
            json_path,
            format!("unsupported version {}", envelope.version),
        ));
    }
    let bin_path = json_path.with_file_name(&envelope.blob.file);
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if bytes.len() != envelope.blob.f64_count * 8 {
        return Err(Error::artifact(
            &bin_path,
            format!(
                "length mismatch: {} bytes, expected {}",
                bytes.len(),
                envelope.blob.f64_count * 8
            ),
        ));
    }
    if sha256_hex(&bytes) != envelope.blob.sha256 {
        return Err(Error::artifact(&bin_path, "checksum mismatch"));
    }
    let values = le_bytes_to_f64s(&bytes).expect("length checked");
    Ok((envelope.header, values))
}
