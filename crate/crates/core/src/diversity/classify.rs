use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attributes::AttributeRecord;
use crate::common::{load_image, DatasetManifest, Domain, ImageTensor, PairedSample};
use crate::{Error, Result};

pub const ATTRIBUTES_FILE: &str = "attributes.jsonl";

/// Predicts perceived attributes for one image.
///
/// The sample record is passed alongside the pixels so that stand-ins can use
/// provenance metadata; a real face model would ignore it.
pub trait AttributeClassifier: Send + Sync {
    fn classify(&self, image: &ImageTensor, sample: &PairedSample) -> Result<AttributeRecord>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MetadataLine {
    id: String,
    #[serde(flatten)]
    record: AttributeRecord,
}

/// Reads ground-truth attributes keyed by sample id from a JSON-lines sidecar.
#[derive(Clone, Debug, Default)]
pub struct MetadataClassifier {
    records: HashMap<String, AttributeRecord>,
}

impl MetadataClassifier {
    pub fn new(records: impl IntoIterator<Item = (String, AttributeRecord)>) -> Self {
        Self { records: records.into_iter().collect() }
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut records = HashMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let m: MetadataLine = serde_json::from_str(line)
                .map_err(|e| Error::Manifest(format!("attribute line {}: {e}", i + 1)))?;
            if records.insert(m.id.clone(), m.record).is_some() {
                return Err(Error::DuplicateId(m.id));
            }
        }
        Ok(Self { records })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileMissing(path.to_path_buf()));
        }
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// Renders `(id, record)` pairs in the sidecar format read by [`MetadataClassifier`].
pub fn attributes_jsonl<'a>(entries: impl IntoIterator<Item = (&'a str, &'a AttributeRecord)>) -> Result<String> {
    let mut s = String::new();
    for (id, record) in entries {
        let line = serde_json::to_string(&MetadataLine { id: id.to_string(), record: *record })?;
        let _ = writeln!(s, "{line}");
    }
    Ok(s)
}

impl AttributeClassifier for MetadataClassifier {
    fn classify(&self, _: &ImageTensor, sample: &PairedSample) -> Result<AttributeRecord> {
        self.records.get(&sample.id).copied().ok_or_else(|| Error::MissingMetadata(sample.id.clone()))
    }
}

/// One record per manifest sample, in manifest order. Image paths resolve
/// against `root`.
pub fn classify_corpus(
    manifest: &DatasetManifest,
    root: impl AsRef<Path>,
    classifier: &dyn AttributeClassifier,
    domain: Domain,
) -> Result<Vec<AttributeRecord>> {
    let root = root.as_ref();
    manifest
        .samples()
        .par_iter()
        .map(|s| {
            load_image(root.join(s.path(domain)))
                .and_then(|im| classifier.classify(&im, s))
                .map_err(|e| e.for_sample(&s.id))
        })
        .collect()
}
