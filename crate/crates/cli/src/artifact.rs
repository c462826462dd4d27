//! Run directory plumbing: atomic writes, digests and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("value serializes");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config: serde_json::Value,
    /// Digests of everything the stage read, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// Digests of everything the stage wrote, keyed by run-relative path.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "sctsa".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            stages: BTreeMap::new(),
        }
    }
}

impl RunManifest {
    pub fn load(run: &Path) -> io::Result<Option<Self>> {
        let path = run.join(MANIFEST);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn save(&self, run: &Path) -> io::Result<()> {
        write_atomic(&run.join(MANIFEST), &json_bytes(self))
    }
}

/// Files written by one stage, tracked for the manifest.
pub struct StageWriter {
    run: PathBuf,
    pub outputs: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
}

impl StageWriter {
    pub fn new(run: &Path) -> Self {
        Self {
            run: run.to_path_buf(),
            outputs: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn run_dir(&self) -> &Path {
        &self.run
    }

    /// `rel` uses `/` separators and is the manifest key.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.run.join(rel), bytes)?;
        self.outputs.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Record a run-relative artifact that this stage reads.
    pub fn read(&mut self, rel: &str) -> io::Result<Vec<u8>> {
        let bytes = fs::read(self.run.join(rel))?;
        self.inputs.insert(rel.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    /// Record an external input by the path it was given as.
    pub fn external(&mut self, path: &Path) -> io::Result<()> {
        self.inputs.insert(path.display().to_string(), digest_file(path)?);
        Ok(())
    }
}
