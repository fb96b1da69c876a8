use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::backend::GeneratorBackend;
use super::prompt::{enrich_prompt, NamePool, PORTRAIT_TEMPLATE};
use crate::common::{derive_seed, save_image, DatasetManifest, PairedSample, RefineParams};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const FAILURES_FILE: &str = "failures.log";
pub const DOMAIN_A_DIR: &str = "domain_a";
pub const DOMAIN_B_DIR: &str = "domain_b";

#[derive(Clone, Debug)]
pub struct BuildSpec {
    pub count: usize,
    pub size: (usize, usize),
    pub seed: u64,
    pub out_dir: PathBuf,
    pub refine_params: RefineParams,
    pub template: String,
}

impl BuildSpec {
    pub fn new(count: usize, size: (usize, usize), seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            count,
            size,
            seed,
            out_dir: out_dir.into(),
            refine_params: RefineParams::default(),
            template: PORTRAIT_TEMPLATE.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleFailure {
    pub id: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct BuildOutcome {
    pub manifest: DatasetManifest,
    pub failures: Vec<SampleFailure>,
}

pub fn sample_id(index: usize) -> String {
    format!("{index:06}")
}

fn build_one(
    a: &dyn GeneratorBackend,
    b: &dyn GeneratorBackend,
    names: &NamePool,
    spec: &BuildSpec,
    index: usize,
) -> Result<PairedSample> {
    let id = sample_id(index);
    let prompt = enrich_prompt(&spec.template, names.cycled(index))?;
    let seed = derive_seed(spec.seed, index as u64);
    let source = a.generate(&prompt, seed, spec.size)?;
    let target = b.refine(&source, &prompt, &spec.refine_params, seed)?;
    if source.dims() != target.dims() {
        return Err(Error::BackendFailure {
            id: id.clone(),
            reason: format!("source {:?} and target {:?} differ in shape", source.dims(), target.dims()),
        });
    }
    let source_path = Path::new(DOMAIN_A_DIR).join(format!("{id}.png"));
    let target_path = Path::new(DOMAIN_B_DIR).join(format!("{id}.png"));
    save_image(&source, spec.out_dir.join(&source_path))?;
    save_image(&target, spec.out_dir.join(&target_path))?;
    Ok(PairedSample { id, source_path, target_path, prompt, seed, generator_params: spec.refine_params })
}

/// Generates `spec.count` source/target pairs under `spec.out_dir`.
///
/// Failed samples are skipped and listed in `failures.log`; the manifest
/// holds the successes in index order.
pub fn build_paired_dataset(
    backend_a: &dyn GeneratorBackend,
    backend_b: &dyn GeneratorBackend,
    names: &NamePool,
    spec: &BuildSpec,
) -> Result<BuildOutcome> {
    if spec.count == 0 {
        return Err(Error::Config("dataset count must be at least 1".into()));
    }
    if !backend_a.capabilities().supports_text_to_image {
        return Err(Error::Config(format!("{} cannot generate from text", backend_a.name())));
    }
    if !backend_b.capabilities().supports_image_to_image {
        return Err(Error::Config(format!("{} has no image-to-image mode", backend_b.name())));
    }
    // Fail fast on template errors rather than once per sample.
    enrich_prompt(&spec.template, names.cycled(0))?;
    for dir in [DOMAIN_A_DIR, DOMAIN_B_DIR] {
        std::fs::create_dir_all(spec.out_dir.join(dir))?;
    }

    let run = |i: usize| build_one(backend_a, backend_b, names, spec, i);
    let results: Vec<Result<PairedSample>> = if backend_a.concurrent() && backend_b.concurrent() {
        (0..spec.count).into_par_iter().map(run).collect()
    } else {
        (0..spec.count).map(run).collect()
    };

    let mut samples = Vec::with_capacity(spec.count);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => {
                let id = sample_id(i);
                let e = e.for_sample(&id);
                log::warn!("sample {id} failed: {e}");
                failures.push(SampleFailure { id, reason: e.to_string() });
            }
        }
    }

    let mut log_text = String::new();
    for f in &failures {
        let _ = writeln!(log_text, "{}\t{}", f.id, f.reason.replace('\n', " "));
    }
    std::fs::write(spec.out_dir.join(FAILURES_FILE), log_text)?;
    let manifest = DatasetManifest::new(spec.seed, samples)?;
    manifest.write(spec.out_dir.join(MANIFEST_FILE))?;
    Ok(BuildOutcome { manifest, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::common::{load_image, ImageTensor};
    use crate::datagen::backend::{oracle_backends, Capabilities};

    #[test]
    fn single_sample_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = oracle_backends();
        let out = build_paired_dataset(&a, &b, &NamePool::builtin(), &BuildSpec::new(1, (32, 32), 3, dir.path()))
            .unwrap();
        assert_eq!(out.manifest.len(), 1);
        let s = &out.manifest.samples()[0];
        assert_eq!(s.generator_params, RefineParams { guidance: 3.0, strength: 0.7, steps: 50 });
        let x = load_image(dir.path().join(&s.source_path)).unwrap();
        let y = load_image(dir.path().join(&s.target_path)).unwrap();
        assert_eq!(x.dims(), y.dims());
        assert_eq!(s.prompt, "A professional portrait of Amara Okafor");
    }

    struct Flaky;

    impl GeneratorBackend for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn capabilities(&self) -> Capabilities {
            Capabilities { supports_text_to_image: true, supports_image_to_image: true }
        }
        fn generate(&self, prompt: &str, _: u64, size: (usize, usize)) -> Result<ImageTensor> {
            if prompt.ends_with("Lukas Brandt") {
                return Err(Error::BackendFailure { id: String::new(), reason: "boom".into() });
            }
            ImageTensor::filled(3, size.0, size.1, 0.25)
        }
        fn refine(&self, image: &ImageTensor, _: &str, _: &RefineParams, _: u64) -> Result<ImageTensor> {
            Ok(image.clone())
        }
    }

    #[test]
    fn failures_are_logged_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let out = build_paired_dataset(&Flaky, &Flaky, &NamePool::builtin(), &BuildSpec::new(3, (8, 8), 0, dir.path()))
            .unwrap();
        let ids: Vec<_> = out.manifest.samples().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["000000", "000002"]);
        assert_eq!(out.failures.len(), 1);
        let log = std::fs::read_to_string(dir.path().join(FAILURES_FILE)).unwrap();
        assert!(log.starts_with("000001\t") && log.contains("boom"));
    }
}
