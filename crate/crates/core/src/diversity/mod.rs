//! Attribute statistics and embedding projections for generated corpora.

mod attributes;
mod classify;
mod report;
mod tsne;

pub use attributes::{
    compare_distributions, records_from_counts, summarize_distribution, AgeBucket, AttributeDistribution,
    AttributeRecord, Ethnicity, Gender, AGE, ETHNICITY, GENDER,
};
pub use classify::{
    attributes_jsonl, classify_corpus, AttributeClassifier, MetadataClassifier, ATTRIBUTES_FILE,
};
pub use report::{diversity_csv, scatter_svg};
pub use tsne::{project_embeddings, Projection, EXAGGERATION, MAX_POINTS, MIN_POINTS};

pub use crate::common::Domain;

/// Face embeddings share the feature-embedder interface used for FID.
pub use crate::evaluation::FeatureEmbedder as FaceEmbedder;

/// Category counts (out of 1000) whose shares round to the published
/// baseline-prompt attribute row.
pub const BASELINE_COUNTS: ([usize; 2], [usize; 3], [usize; 6]) =
    ([730, 270], [610, 390, 0], [116, 10, 10, 258, 20, 586]);

/// Category counts (out of 1000) whose shares round to the published
/// enriched-prompt attribute row.
pub const ENHANCED_COUNTS: ([usize; 2], [usize; 3], [usize; 6]) =
    ([600, 400], [400, 580, 20], [104, 52, 42, 82, 20, 700]);
