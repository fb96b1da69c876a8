use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::common::ImageTensor;
use crate::{Error, Result};

/// A named inference pipeline producing an image of the requested `(H, W)`.
pub struct Pipeline<'a> {
    pub name: String,
    run: Box<dyn FnMut(usize, usize) -> Result<ImageTensor> + 'a>,
}

impl<'a> Pipeline<'a> {
    pub fn new(name: impl Into<String>, run: impl FnMut(usize, usize) -> Result<ImageTensor> + 'a) -> Self {
        Self { name: name.into(), run: Box::new(run) }
    }

    /// Chains an image-to-image stage after `self`.
    pub fn then(mut self, name: impl Into<String>, mut head: impl FnMut(ImageTensor) -> Result<ImageTensor> + 'a) -> Self {
        let mut first = self.run;
        self.run = Box::new(move |h, w| head(first(h, w)?));
        self.name = name.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub pipeline: String,
    pub height: usize,
    pub width: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub reps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    pub fn new(rows: Vec<TimingRow>) -> Result<Self> {
        for r in &rows {
            if !(r.mean_seconds > 0.0) || r.reps == 0 {
                return Err(Error::BadBenchmark(format!(
                    "row {} {}x{} needs mean > 0 and reps >= 1",
                    r.pipeline, r.height, r.width
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn mean(&self, pipeline: &str, size: (usize, usize)) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.pipeline == pipeline && (r.height, r.width) == size)
            .map(|r| r.mean_seconds)
    }

    /// `1 - mean_x / mean_y` at one size.
    pub fn speedup(&self, x: &str, y: &str, size: (usize, usize)) -> Option<f64> {
        Some(1.0 - self.mean(x, size)? / self.mean(y, size)?)
    }

    /// `mean_x / mean_y - 1` at one size.
    pub fn overhead(&self, x: &str, y: &str, size: (usize, usize)) -> Option<f64> {
        Some(self.mean(x, size)? / self.mean(y, size)? - 1.0)
    }

    pub fn pipelines(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.pipeline.as_str()) {
                names.push(&r.pipeline);
            }
        }
        names
    }

    pub fn sizes(&self) -> Vec<(usize, usize)> {
        let mut sizes: Vec<(usize, usize)> = Vec::new();
        for r in &self.rows {
            if !sizes.contains(&(r.height, r.width)) {
                sizes.push((r.height, r.width));
            }
        }
        sizes
    }
}

/// Times each pipeline at each size: `warmup` untimed runs, then `reps` timed
/// runs, one pipeline at a time on the calling thread.
pub fn benchmark_inference(
    pipelines: &mut [Pipeline<'_>],
    sizes: &[(usize, usize)],
    reps: usize,
    warmup: usize,
) -> Result<TimingTable> {
    if reps < 3 {
        return Err(Error::BadBenchmark(format!("reps must be >= 3, got {reps}")));
    }
    if warmup < 1 {
        return Err(Error::BadBenchmark("warmup must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for p in pipelines.iter_mut() {
        for &(h, w) in sizes {
            let fail = |e: Error| Error::PipelineFailure { name: p.name.clone(), reason: e.to_string() };
            for _ in 0..warmup {
                (p.run)(h, w).map_err(fail)?;
            }
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                let t0 = Instant::now();
                let out = (p.run)(h, w).map_err(fail)?;
                times.push(t0.elapsed().as_secs_f64());
                std::hint::black_box(out);
            }
            let mean = times.iter().sum::<f64>() / reps as f64;
            let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            rows.push(TimingRow {
                pipeline: p.name.clone(),
                height: h,
                width: w,
                mean_seconds: mean.max(f64::MIN_POSITIVE),
                std_seconds: var.sqrt(),
                reps,
            });
        }
    }
    TimingTable::new(rows)
}

/// Recorded mean latencies (seconds) of the three generation pipelines at
/// 128, 256 and 512 pixels.
pub fn recorded_timings() -> TimingTable {
    let data = [
        ("dev", [0.41, 1.72, 7.05]),
        ("schnell", [0.06, 0.25, 1.15]),
        ("schnell+i2i", [0.07, 0.28, 1.24]),
    ];
    let rows = data
        .iter()
        .flat_map(|(name, means)| {
            [128, 256, 512].into_iter().zip(means).map(move |(s, &m)| TimingRow {
                pipeline: name.to_string(),
                height: s,
                width: s,
                mean_seconds: m,
                std_seconds: 0.0,
                reps: 1,
            })
        })
        .collect();
    TimingTable::new(rows).expect("recorded rows are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorded_speedup_and_overhead() {
        let t = recorded_timings();
        let s = t.speedup("schnell+i2i", "dev", (512, 512)).unwrap();
        assert!((s - (1.0 - 1.24 / 7.05)).abs() < 1e-15);
        assert_eq!((s * 1000.0).round() / 10.0, 82.4);
        let o = t.overhead("schnell+i2i", "schnell", (512, 512)).unwrap();
        assert_eq!((o * 1000.0).round() / 10.0, 7.8);
        assert_eq!(t.pipelines(), ["dev", "schnell", "schnell+i2i"]);
        assert_eq!(t.sizes().len(), 3);
    }

    #[test]
    fn parameter_checks_and_failures() {
        let mut p = vec![Pipeline::new("ok", |h, w| ImageTensor::filled(1, h, w, 0.0))];
        assert!(matches!(benchmark_inference(&mut p, &[(2, 2)], 2, 1), Err(Error::BadBenchmark(_))));
        assert!(matches!(benchmark_inference(&mut p, &[(2, 2)], 3, 0), Err(Error::BadBenchmark(_))));
        let mut bad = vec![Pipeline::new("bad", |_, _| Err(Error::EmptyInput))];
        let e = benchmark_inference(&mut bad, &[(2, 2)], 3, 1).unwrap_err();
        assert!(matches!(e, Error::PipelineFailure { ref name, .. } if name == "bad"));
    }

    #[test]
    fn chained_pipeline_counts_calls() {
        let mut calls = 0;
        {
            let mut p = vec![Pipeline::new("gen", |h, w| ImageTensor::filled(3, h, w, 0.5)).then("gen+head", |x| {
                calls += 1;
                Ok(x)
            })];
            let t = benchmark_inference(&mut p, &[(4, 4), (8, 8)], 3, 2).unwrap();
            assert_eq!(t.rows.len(), 2);
            assert_eq!(t.rows[0].pipeline, "gen+head");
        }
        assert_eq!(calls, 10);
    }
}
