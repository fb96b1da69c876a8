//! Shared domain types: images, manifests, splits and run configuration.

mod config;
mod image;
mod manifest;
mod split;

use sha2::{Digest, Sha256};

pub use config::{ModelKind, OptimConfig, RunConfig};
pub use image::{load_image, save_image, ImageTensor};
pub use manifest::{DatasetManifest, Domain, PairedSample, RefineParams, SCHEMA_VERSION};
pub use split::{split_dataset, SplitRatios};

/// Stable 64-bit keyed hash (first 8 bytes of SHA-256 over `key || data`).
pub fn keyed_hash(key: u64, data: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(key.to_le_bytes());
    h.update(data);
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Seed for item `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    keyed_hash(seed, &index.to_le_bytes())
}
