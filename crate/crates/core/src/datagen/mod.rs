//! Paired synthetic dataset construction.

mod backend;
mod build;
mod oracle;
mod prompt;

pub use backend::{
    oracle_backends, BackendMode, BackendRequest, BackendResponse, Capabilities, CommandBackend,
    GeneratorBackend, OracleBaseline, OracleDistilled,
};
pub use build::{
    build_paired_dataset, sample_id, BuildOutcome, BuildSpec, SampleFailure, DOMAIN_A_DIR, DOMAIN_B_DIR,
    FAILURES_FILE, MANIFEST_FILE,
};
pub use oracle::{mean_abs_gradient, procedural_oracle_pair, ORACLE_MIN_SIZE};
pub use prompt::{enrich_prompt, NamePool, NAME_PLACEHOLDER, PORTRAIT_TEMPLATE};
