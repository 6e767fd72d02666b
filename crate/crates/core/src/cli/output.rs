use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact::{sha256_hex, to_json_bytes, write_atomic};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Per-directory record of what each command wrote.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub commands: BTreeMap<String, CommandRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    /// Output path (relative to the directory) to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load_or_default(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| Error::artifact(&path, e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest { version: 1, ..Default::default() }),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    /// Records `command` (replacing any earlier record) and rewrites the manifest.
    pub fn record(dir: &Path, command: &str, record: CommandRecord) -> Result<()> {
        let mut m = Self::load_or_default(dir)?;
        m.version = 1;
        m.commands.insert(command.to_string(), record);
        write_atomic(&dir.join(MANIFEST_FILE), &to_json_bytes(&m)?)
    }
}

/// Collects written files and their checksums for the manifest.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Adds already-written files.
    pub fn track(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            let rel = p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().replace('\\', "/");
            self.artifacts.insert(rel, sha256_hex(&bytes));
        }
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_atomic(&path, bytes)?;
        self.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        self.write(rel, &to_json_bytes(value)?)
    }

    pub fn finish(self, command: &str, config_sha256: &str, seeds: BTreeMap<String, u64>) -> Result<()> {
        Manifest::record(
            &self.dir,
            command,
            CommandRecord {
                config_sha256: config_sha256.to_string(),
                seeds,
                artifacts: self.artifacts,
            },
        )
    }
}

/// Binary PGM (P5, maxval 255); values are clamped to `[0, 1]` and rounded half-up.
pub fn pgm_bytes(width: usize, height: usize, pixels: &[f64]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::Argument(format!(
            "PGM expects {width}x{height} = {} pixels, got {}",
            width * height,
            pixels.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|v| pgm_level(*v)));
    Ok(out)
}

pub fn pgm_level(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}
