use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::record::RunRecord;
use crate::common::RunConfig;
use crate::evaluation::fmt_num;
use crate::{Error, Result};

/// Axes of a `(lambda_cycle, learning_rate)` sweep over a fixed base config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambdas: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

impl GridSpec {
    pub fn new(lambdas: Vec<f64>, learning_rates: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || learning_rates.is_empty() {
            return Err(Error::BadConfig("grid axes must be non-empty".into()));
        }
        if lambdas.iter().chain(&learning_rates).any(|v| !v.is_finite()) {
            return Err(Error::BadConfig("grid values must be finite".into()));
        }
        Ok(Self { lambdas, learning_rates })
    }

    /// Cells in row-major order: lambda outer, learning rate inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.lambdas.iter().flat_map(|&l| self.learning_rates.iter().map(move |&lr| (l, lr))).collect()
    }

    /// The base config specialised to one cell, with a distinct run name.
    pub fn cell_config(&self, base: &RunConfig, lambda: f64, lr: f64) -> RunConfig {
        let mut c = base.clone();
        c.loss.lambda_cycle = lambda;
        c.optim.learning_rate = lr;
        c.name = format!("{}-lambda{}-lr{}", base.name, lambda, lr);
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub lambda_cycle: f64,
    pub learning_rate: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    /// Successful cells, best first.
    pub ranked: Vec<RunRecord>,
    pub failures: Vec<CellFailure>,
}

/// Ascending by loss, ties broken by descending SSIM.
pub fn rank_records(mut records: Vec<RunRecord>) -> Vec<RunRecord> {
    records.sort_by(|a, b| {
        a.best_loss.total_cmp(&b.best_loss).then_with(|| b.ssim_full_cycle.total_cmp(&a.ssim_full_cycle))
    });
    records
}

/// Runs every cell through `run`; failing cells are recorded and skipped.
pub fn grid_search(
    spec: &GridSpec,
    base: &RunConfig,
    mut run: impl FnMut(&RunConfig) -> Result<RunRecord>,
) -> GridOutcome {
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (lambda, lr) in spec.cells() {
        match run(&spec.cell_config(base, lambda, lr)) {
            Ok(r) if r.best_loss.is_finite() => ok.push(r),
            Ok(r) => failures.push(CellFailure {
                lambda_cycle: lambda,
                learning_rate: lr,
                reason: format!("non-finite loss {}", r.best_loss),
            }),
            Err(e) => failures.push(CellFailure { lambda_cycle: lambda, learning_rate: lr, reason: e.to_string() }),
        }
    }
    GridOutcome { ranked: rank_records(ok), failures }
}

pub fn grid_summary_csv(outcome: &GridOutcome) -> String {
    let mut s = String::from("rank,lambda_cycle,learning_rate,batch_size,loss,ssim,best_epoch,seconds,status\n");
    for (i, r) in outcome.ranked.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},ok",
            i + 1,
            fmt_num(r.lambda_cycle),
            fmt_num(r.learning_rate),
            r.batch_size,
            fmt_num(r.best_loss),
            fmt_num(r.ssim_full_cycle),
            r.best_epoch,
            format_args!("{:.3}", r.seconds)
        );
    }
    for f in &outcome.failures {
        let reason = f.reason.replace([',', '\n'], " ");
        let _ = writeln!(s, ",{},{},,,,,,failed: {reason}", fmt_num(f.lambda_cycle), fmt_num(f.learning_rate));
    }
    s
}

fn recorded(cells: &[(f64, f64, f64, f64)], batch_size: usize) -> Vec<RunRecord> {
    cells
        .iter()
        .map(|&(lambda, lr, loss, ssim)| RunRecord {
            name: format!("recorded-lambda{lambda}-lr{lr}"),
            lambda_cycle: lambda,
            learning_rate: lr,
            batch_size,
            best_epoch: 0,
            best_loss: loss,
            ssim_full_cycle: ssim,
            epoch0_loss: f64::NAN,
            epochs_run: 0,
            checkpoint: PathBuf::new(),
            seconds: 0.0,
        })
        .collect()
}

/// Published CycleGAN sweep at batch size 8: `(lambda, lr, L, SSIM)`.
pub fn recorded_cyclegan_grid() -> Vec<RunRecord> {
    recorded(
        &[
            (10.0, 1e-4, 0.96, 0.96),
            (10.0, 2e-4, 0.98, 0.95),
            (10.0, 3e-4, 1.59, 0.68),
            (5.0, 1e-4, 0.85, 0.95),
            (5.0, 2e-4, 1.02, 0.95),
            (5.0, 3e-4, 1.44, 0.75),
            (2.0, 1e-4, 0.72, 0.95),
            (2.0, 2e-4, 0.90, 0.96),
            (2.0, 3e-4, 1.36, 0.80),
        ],
        8,
    )
}

/// Published ESA-CycleGAN sweep at LR 1e-4.
pub fn recorded_esa_grid() -> Vec<RunRecord> {
    recorded(&[(10.0, 1e-4, 1.22, 0.92), (5.0, 1e-4, 0.77, 0.96), (2.0, 1e-4, 0.61, 0.95)], 8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_row_major_and_names_distinct() {
        let g = GridSpec::new(vec![10.0, 2.0], vec![1e-4, 3e-4]).unwrap();
        assert_eq!(g.cells(), vec![(10.0, 1e-4), (10.0, 3e-4), (2.0, 1e-4), (2.0, 3e-4)]);
        let base = RunConfig::cyclegan();
        let names: std::collections::BTreeSet<_> =
            g.cells().iter().map(|&(l, lr)| g.cell_config(&base, l, lr).name).collect();
        assert_eq!(names.len(), 4);
        assert!(GridSpec::new(vec![], vec![1e-4]).is_err());
    }

    #[test]
    fn ties_prefer_higher_ssim() {
        let mut r = recorded(&[(1.0, 1e-4, 0.5, 0.8), (2.0, 1e-4, 0.5, 0.9), (3.0, 1e-4, 0.4, 0.1)], 8);
        r = rank_records(r);
        let order: Vec<f64> = r.iter().map(|x| x.lambda_cycle).collect();
        assert_eq!(order, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn failures_are_recorded_and_ranking_continues() {
        let g = GridSpec::new(vec![1.0, 2.0, 3.0], vec![1e-4]).unwrap();
        let out = grid_search(&g, &RunConfig::cyclegan(), |c| {
            if c.loss.lambda_cycle == 2.0 {
                return Err(Error::DivergenceDetected { epoch: 3 });
            }
            Ok(recorded(&[(c.loss.lambda_cycle, 1e-4, 1.0 / c.loss.lambda_cycle, 0.9)], 8).remove(0))
        });
        assert_eq!(out.ranked.len(), 2);
        assert_eq!(out.ranked[0].lambda_cycle, 3.0);
        assert_eq!(out.failures.len(), 1);
        let csv = grid_summary_csv(&out);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().contains("failed"));
    }
}
