use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Which half of a pair: A is the distilled-generator source, B the baseline target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    A,
    B,
}

/// Parameters of the image-to-image refine pass that produced the target image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineParams {
    pub guidance: f64,
    pub strength: f64,
    pub steps: u32,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self { guidance: 3.0, strength: 0.7, steps: 50 }
    }
}

/// One source/target pair. Paths are relative to the manifest directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub id: String,
    pub source_path: PathBuf,
    pub target_path: PathBuf,
    pub prompt: String,
    pub seed: u64,
    pub generator_params: RefineParams,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    created_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub created_seed: u64,
    samples: Vec<PairedSample>,
}

impl PairedSample {
    pub fn path(&self, domain: Domain) -> &Path {
        match domain {
            Domain::A => &self.source_path,
            Domain::B => &self.target_path,
        }
    }
}

impl DatasetManifest {
    pub fn new(created_seed: u64, samples: Vec<PairedSample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self { schema_version: SCHEMA_VERSION, created_seed, samples })
    }

    pub fn samples(&self) -> &[PairedSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// JSON-lines: a header record, then one sample per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&Header {
            schema_version: self.schema_version,
            created_seed: self.created_seed,
        })?;
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{}", serde_json::to_string(s)?);
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Header = serde_json::from_str(
            lines.next().ok_or_else(|| Error::Manifest("missing header line".into()))?,
        )
        .map_err(|e| Error::Manifest(format!("bad header: {e}")))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(Error::Manifest(format!(
                "schema version {} unsupported (expected {SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        let samples = lines
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Manifest(format!("line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<PairedSample>>>()?;
        Self::new(header.created_seed, samples)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()?)
            .map_err(|e| Error::WriteError { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileMissing(path.to_path_buf()));
        }
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }

    /// Keeps the samples for which `keep` holds, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&PairedSample) -> bool) -> Self {
        Self {
            schema_version: self.schema_version,
            created_seed: self.created_seed,
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }
}
