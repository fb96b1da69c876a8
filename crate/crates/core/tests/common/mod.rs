#![allow(dead_code)]

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use restore_core::common::{DatasetManifest, Domain, ImageTensor};
use restore_core::datagen::{build_paired_dataset, oracle_backends, BuildSpec, NamePool};
use restore_core::training::load_domain;

/// Builds an oracle dataset of `count` 64x64 pairs under `dir`.
pub fn oracle_dataset(dir: &Path, count: usize, seed: u64) -> DatasetManifest {
    let (a, b) = oracle_backends();
    let spec = BuildSpec::new(count, (64, 64), seed, dir);
    let out = build_paired_dataset(&a, &b, &NamePool::builtin(), &spec).expect("oracle build");
    assert!(out.failures.is_empty());
    out.manifest
}

/// Domain images of the samples in `range`, as an `N x 3 x H x W` batch.
pub fn side(manifest: &DatasetManifest, dir: &Path, range: std::ops::Range<usize>, d: Domain) -> Tensor {
    let sub = DatasetManifest::new(0, manifest.samples()[range].to_vec()).unwrap();
    load_domain(&sub, dir, d).unwrap()
}

pub fn images(t: &Tensor) -> Vec<ImageTensor> {
    ImageTensor::unstack(t).unwrap()
}

pub fn uniform(seed: u64, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

pub fn uniform_f32(seed: u64, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    uniform(seed, shape, lo, hi).to_dtype(DType::F32).unwrap()
}
