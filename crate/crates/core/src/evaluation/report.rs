use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bench::TimingTable;
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics_report.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const TIMING_PLOT_FILE: &str = "timing.svg";

/// Table-4-style quality row for one model variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub variant: String,
    pub fid_schnell: Option<f64>,
    pub fid_dev: Option<f64>,
    pub clip_iqa: Option<f64>,
    pub ssim: Option<f64>,
    pub psnr: Option<f64>,
}

impl MetricRow {
    pub fn new(variant: impl Into<String>, fid_schnell: f64, fid_dev: f64) -> Self {
        Self {
            variant: variant.into(),
            fid_schnell: Some(fid_schnell),
            fid_dev: Some(fid_dev),
            clip_iqa: None,
            ssim: None,
            psnr: None,
        }
    }

    pub fn with_clip_iqa(mut self, v: f64) -> Self {
        self.clip_iqa = Some(v);
        self
    }

    pub fn fid_diff(&self) -> Option<f64> {
        Some(self.fid_schnell? - self.fid_dev?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

/// Shortest decimal form after rounding to 10 places; stable across runs.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = (v * 1e10).round() / 1e10;
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

impl MetricReport {
    pub fn new(rows: Vec<MetricRow>) -> Result<Self> {
        for r in &rows {
            for v in [r.fid_schnell, r.fid_dev].into_iter().flatten() {
                if !(v >= 0.0) {
                    return Err(Error::Config(format!("{}: FID values must be >= 0, got {v}", r.variant)));
                }
            }
        }
        Ok(Self { rows })
    }

    /// Columns `variant, fid_schnell, fid_dev, fid_diff, clip_iqa`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,fid_schnell,fid_dev,fid_diff,clip_iqa\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.variant,
                opt(r.fid_schnell),
                opt(r.fid_dev),
                opt(r.fid_diff()),
                opt(r.clip_iqa)
            );
        }
        s
    }
}

/// The published quality comparison, including the two reference generators.
pub fn recorded_metric_report() -> MetricReport {
    let reference = |v: &str, s: Option<f64>, d: Option<f64>, c: f64| MetricRow {
        variant: v.into(),
        fid_schnell: s,
        fid_dev: d,
        clip_iqa: Some(c),
        ssim: None,
        psnr: None,
    };
    MetricReport {
        rows: vec![
            reference("schnell", None, Some(0.37), 0.35),
            reference("dev", Some(0.37), None, 0.36),
            MetricRow::new("lora-realism", 0.32, 0.59).with_clip_iqa(0.34),
            MetricRow::new("pairwise", 0.54, 0.53).with_clip_iqa(0.34),
            MetricRow::new("non-pairwise", 0.75, 0.34).with_clip_iqa(0.35),
        ],
    }
}

pub fn timing_csv(t: &TimingTable) -> String {
    let mut s = String::from("pipeline,height,width,mean_seconds,std_seconds,reps\n");
    for r in &t.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.pipeline,
            r.height,
            r.width,
            fmt_num(r.mean_seconds),
            fmt_num(r.std_seconds),
            r.reps
        );
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Line plot of mean latency against image size, one line per pipeline.
pub fn timing_svg(t: &TimingTable) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let sizes = t.sizes();
    let ymax = t.rows.iter().map(|r| r.mean_seconds).fold(0.0f64, f64::max).max(1e-9) * 1.1;
    let xs = |i: usize| m + (w - 2.0 * m) * if sizes.len() > 1 { i as f64 / (sizes.len() - 1) as f64 } else { 0.5 };
    let ys = |v: f64| h - m - (h - 2.0 * m) * v / ymax;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    for (i, (sh, sw)) in sizes.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{sh}x{sw}</text>"#, xs(i), h - m + 18.0);
    }
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, m - 6.0, ys(v) + 4.0, fmt_num((v * 1000.0).round() / 1000.0));
    }
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">mean inference time [s]</text>"#, w / 2.0);
    for (p, name) in t.pipelines().iter().enumerate() {
        let color = PALETTE[p % PALETTE.len()];
        let pts: Vec<String> = sizes
            .iter()
            .enumerate()
            .filter_map(|(i, &sz)| t.mean(name, sz).map(|v| format!("{:.1},{:.1}", xs(i), ys(v))))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#, w - m + 4.0 - 120.0, m + 16.0 * p as f64);
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| Error::WriteError { path: path.clone(), reason: e.to_string() })?;
    Ok(path)
}

/// Writes the CSV reports (and the timing plot when `plots`) into `out_dir`.
pub fn emit_report(
    metrics: Option<&MetricReport>,
    timing: Option<&TimingTable>,
    out_dir: impl AsRef<Path>,
    plots: bool,
) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::WriteError { path: dir.to_path_buf(), reason: e.to_string() })?;
    let mut paths = Vec::new();
    if let Some(m) = metrics {
        paths.push(write(dir.join(METRICS_FILE), &m.to_csv())?);
    }
    if let Some(t) = timing {
        paths.push(write(dir.join(TIMING_FILE), &timing_csv(t))?);
        if plots {
            paths.push(write(dir.join(TIMING_PLOT_FILE), &timing_svg(t))?);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::recorded_timings;

    #[test]
    fn recorded_table_csv() {
        let csv = recorded_metric_report().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "variant,fid_schnell,fid_dev,fid_diff,clip_iqa");
        assert_eq!(lines[1], "schnell,,0.37,,0.35");
        assert_eq!(lines[3], "lora-realism,0.32,0.59,-0.27,0.34");
        assert_eq!(lines[4], "pairwise,0.54,0.53,0.01,0.34");
        assert_eq!(lines[5], "non-pairwise,0.75,0.34,0.41,0.35");
        assert_eq!(MetricReport::default().to_csv().lines().count(), 1);
    }

    #[test]
    fn emitted_files_are_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let (m, t) = (recorded_metric_report(), recorded_timings());
        let a = emit_report(Some(&m), Some(&t), dir.path().join("a"), true).unwrap();
        let b = emit_report(Some(&m), Some(&t), dir.path().join("b"), true).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        assert_eq!(timing_csv(&t).lines().count(), 10);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.54 - 0.53), "0.01");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(1e-4), "0.0001");
    }
}
