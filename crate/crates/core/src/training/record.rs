use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::evaluation::fmt_num;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Absent for the pre-training reference pass (epoch 0).
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub val_ssim: f64,
    /// Wall-clock time of the epoch; not persisted in checkpoints.
    #[serde(skip)]
    pub seconds: Option<f64>,
}

/// Outcome of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub lambda_cycle: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub best_epoch: usize,
    /// Best validation loss L.
    pub best_loss: f64,
    /// Validation SSIM at the best epoch (full-cycle SSIM for CycleGAN runs).
    pub ssim_full_cycle: f64,
    pub epoch0_loss: f64,
    pub epochs_run: usize,
    pub checkpoint: PathBuf,
    pub seconds: f64,
}

pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_ssim,seconds\n");
    for m in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            m.epoch,
            m.train_loss.map(fmt_num).unwrap_or_default(),
            fmt_num(m.val_loss),
            fmt_num(m.val_ssim),
            m.seconds.map(|v| format!("{v:.3}")).unwrap_or_default()
        );
    }
    s
}
