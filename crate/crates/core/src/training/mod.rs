mod adam;
mod checkpoint;
mod cyclegan;
mod data;
mod early_stop;
mod grid;
mod pairwise;
mod record;

use std::path::{Path, PathBuf};

pub use adam::{Adam, AdamHyper};
pub use checkpoint::{
    archive_path, load_checkpoint, read_archive, read_sidecar, save_checkpoint, sidecar_path, write_archive,
    RngState, Sidecar, TrainState, CHECKPOINT_VERSION,
};
pub use cyclegan::{evaluate_cyclegan, train_cyclegan, ImagePool, DA_SET, DB_SET, F_SET, G_SET, POOL_CAPACITY};
pub use data::{epoch_order, gather, load_domain, stack_rgb, PairedData, UnpairedData};
pub use early_stop::{EarlyStopping, StopDecision};
pub use grid::{
    grid_search, grid_summary_csv, rank_records, recorded_cyclegan_grid, recorded_esa_grid, CellFailure, GridOutcome,
    GridSpec,
};
pub use pairwise::{evaluate_pairwise, train_pairwise, UNET_SET};
pub use record::{metrics_csv, EpochMetrics, RunRecord};

use crate::common::RunConfig;
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RECORD_FILE: &str = "record.json";
pub const GRID_SUMMARY_FILE: &str = "grid_summary.csv";

/// Replaces the validation metric seen by early stopping: `(epoch, measured) -> used`.
pub type MetricOverride = Box<dyn Fn(usize, f64) -> f64 + Send + Sync>;

#[derive(Default)]
pub struct TrainOptions {
    /// Defaults to `config.output_dir / config.name`.
    pub run_dir: Option<PathBuf>,
    /// Continue from `checkpoints/last.*` when present.
    pub resume: bool,
    pub metric_override: Option<MetricOverride>,
    /// Return after this epoch as if interrupted.
    pub stop_after_epoch: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best_checkpoint: PathBuf,
    pub record: RunRecord,
    pub history: Vec<EpochMetrics>,
    pub stopped_early: bool,
    pub run_dir: PathBuf,
}

pub fn run_dir_for(config: &RunConfig) -> PathBuf {
    config.output_dir.join(&config.name)
}

pub fn best_stem(run_dir: &Path) -> PathBuf {
    run_dir.join("checkpoints").join("best")
}

pub fn last_stem(run_dir: &Path) -> PathBuf {
    run_dir.join("checkpoints").join("last")
}

pub(crate) fn prepare_run_dir(config: &RunConfig, opts: &TrainOptions) -> Result<PathBuf> {
    let dir = opts.run_dir.clone().unwrap_or_else(|| run_dir_for(config));
    std::fs::create_dir_all(dir.join("checkpoints"))
        .map_err(|e| Error::WriteError { path: dir.clone(), reason: e.to_string() })?;
    config.save(dir.join(CONFIG_FILE))?;
    Ok(dir)
}
