//! Tar shard datasets: co-named entries `<key>.<ext>` form one sample.
//!
//! Shards are uncompressed ustar archives named `shard-NNNNNN.tar` next to a
//! `manifest.json` recording per-shard sample counts.

mod pipeline;
mod stream;
mod ustar;
mod writer;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use pipeline::Pipeline;
pub use stream::{stream_samples, SampleStream};
pub use writer::write_shards;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// One dataset sample: a key and its payloads by extension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sample {
    pub key: String,
    pub parts: BTreeMap<String, Vec<u8>>,
}

impl Sample {
    pub fn new(key: impl Into<String>) -> Result<Self> {
        let key = key.into();
        validate_key(&key)?;
        Ok(Self { key, parts: BTreeMap::new() })
    }

    pub fn with_part(mut self, ext: impl Into<String>, data: impl Into<Vec<u8>>) -> Result<Self> {
        let ext = ext.into();
        validate_ext(&ext)?;
        self.parts.insert(ext, data.into());
        Ok(self)
    }

    pub fn part(&self, ext: &str) -> Option<&[u8]> {
        self.parts.get(ext).map(Vec::as_slice)
    }
}

pub(crate) fn validate_key(key: &str) -> Result<()> {
    if key.is_empty() {
        return Err(Error::Validation("sample key is empty".into()));
    }
    if key.contains(['.', '/', '\0']) {
        return Err(Error::Validation(format!("sample key `{key}` contains `.`, `/` or NUL")));
    }
    Ok(())
}

pub(crate) fn validate_ext(ext: &str) -> Result<()> {
    if ext.is_empty() || ext.contains(['/', '\0']) {
        return Err(Error::Validation(format!("invalid part extension `{ext}`")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub path: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub total_samples: u64,
    pub shards: Vec<ShardEntry>,
}

pub(crate) fn shard_file_name(i: usize) -> String {
    format!("shard-{i:06}.tar")
}

/// An ordered list of shards with their expected sample counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardSet {
    dir: PathBuf,
    manifest: Manifest,
}

impl ShardSet {
    /// Reads `manifest.json`; shard archives are opened only when streamed.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::UnsupportedVersion { found: manifest.version, supported: MANIFEST_VERSION });
        }
        for s in &manifest.shards {
            let plain = Path::new(&s.path).file_name().is_some_and(|n| n == s.path.as_str());
            if !plain {
                return Err(Error::Corruption(format!("manifest shard path `{}` is not a plain file name", s.path)));
            }
        }
        let sum: u64 = manifest.shards.iter().map(|s| s.count).sum();
        if sum != manifest.total_samples {
            return Err(Error::Corruption(format!(
                "manifest total_samples {} but shard counts sum to {sum}",
                manifest.total_samples
            )));
        }
        Ok(Self { dir, manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn shard_paths(&self) -> Vec<PathBuf> {
        self.manifest.shards.iter().map(|s| self.dir.join(&s.path)).collect()
    }

    pub fn samples_per_shard(&self) -> Vec<u64> {
        self.manifest.shards.iter().map(|s| s.count).collect()
    }

    pub fn total_samples(&self) -> u64 {
        self.manifest.total_samples
    }

    pub fn len(&self) -> usize {
        self.manifest.shards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.shards.is_empty()
    }

    /// Shards `worker, worker + n_workers, ...` for one of `n_workers`
    /// parallel readers. The splits of all workers partition the set.
    pub fn split(&self, worker: usize, n_workers: usize) -> Result<ShardSet> {
        if n_workers == 0 || worker >= n_workers {
            return Err(Error::Validation(format!("worker {worker} of {n_workers}")));
        }
        let shards: Vec<ShardEntry> = self
            .manifest
            .shards
            .iter()
            .skip(worker)
            .step_by(n_workers)
            .cloned()
            .collect();
        let total_samples = shards.iter().map(|s| s.count).sum();
        Ok(ShardSet {
            dir: self.dir.clone(),
            manifest: Manifest { version: self.manifest.version, total_samples, shards },
        })
    }

    pub fn stream(&self, shuffle_buffer: usize, seed: u64) -> SampleStream {
        stream_samples(self, shuffle_buffer, seed)
    }
}
