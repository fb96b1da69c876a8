//! Quality and efficiency metrics: SSIM/PSNR, FID and FID_diff, no-reference
//! scoring, latency benchmarking and their CSV/SVG reports.

mod bench;
mod embed;
mod fid;
mod image_metrics;
mod quality;
mod report;

pub use bench::{benchmark_inference, recorded_timings, Pipeline, TimingRow, TimingTable};
pub use embed::{FeatureEmbedder, RandomPyramidEmbedder};
pub use fid::{embed_all, fid, fid_diff, fit_gaussian, FidDiff, GaussianStats, INDEFINITE_TOL};
pub use image_metrics::{mean_ssim, psnr, ssim, SSIM_SIGMA, SSIM_WINDOW};
pub use quality::{no_reference_quality, ConstantScorer, NoReferenceScorer};
pub use report::{
    emit_report, fmt_num, recorded_metric_report, timing_csv, timing_svg, MetricReport, MetricRow,
    METRICS_FILE, TIMING_FILE, TIMING_PLOT_FILE,
};
