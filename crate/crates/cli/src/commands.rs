use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use candle_core::{DType, Device, Tensor};
use serde_json::{json, Value};

use restore_core::common::{
    load_image, split_dataset, DatasetManifest, Domain, ImageTensor, ModelKind, RunConfig,
};
use restore_core::datagen::{
    build_paired_dataset, oracle_backends, BuildSpec, Capabilities, CommandBackend, GeneratorBackend, NamePool,
    MANIFEST_FILE,
};
use restore_core::diversity::{
    classify_corpus, compare_distributions, diversity_csv, project_embeddings, scatter_svg, summarize_distribution,
    MetadataClassifier, ATTRIBUTES_FILE,
};
use restore_core::evaluation::{
    benchmark_inference, emit_report, embed_all, fid_diff, mean_ssim, psnr, recorded_metric_report, recorded_timings,
    FidDiff, MetricReport, MetricRow, Pipeline, RandomPyramidEmbedder, TimingTable,
};
use restore_core::losses::RandomPyramidExtractor;
use restore_core::models::{generator_forward, unet_forward};
use restore_core::training::{
    grid_search, grid_summary_csv, load_checkpoint, load_domain, rank_records, read_sidecar, recorded_cyclegan_grid,
    recorded_esa_grid, train_cyclegan, train_pairwise, GridOutcome, GridSpec, PairedData, TrainOptions,
    TrainOutcome, UnpairedData, GRID_SUMMARY_FILE, G_SET, UNET_SET,
};

use crate::args::*;
use crate::UsageError;

/// What a command reports: a one-line summary, a JSON result and where to put it.
pub struct Outcome {
    pub summary: String,
    pub result: Value,
    pub dir: PathBuf,
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::DatasetOracle(a) => dataset(cli, a, None),
        Command::DatasetBuild(a) => dataset(cli, &a.base, Some(a)),
        Command::Diversity(a) => diversity(cli, a),
        Command::TrainPairwise(a) => pairwise(cli, a),
        Command::TrainCyclegan(a) => cyclegan(cli, a),
        Command::Grid(a) => grid(cli, a),
        Command::EvalFidDiff(a) => eval_fid_diff(cli, a),
        Command::EvalPair(a) => eval_pair(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

fn load_config(args: &ConfigArgs, default: RunConfig, out: &Path) -> anyhow::Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => default,
    };
    c.output_dir = out.to_path_buf();
    for o in &args.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got {o:?}")))?;
        c.set(k.trim(), v.trim())?;
    }
    Ok(c)
}

fn read_manifest(dir: &Path) -> anyhow::Result<DatasetManifest> {
    Ok(DatasetManifest::read(dir.join(MANIFEST_FILE))?)
}

fn dataset(cli: &Cli, a: &DatasetOracleArgs, build: Option<&DatasetBuildArgs>) -> anyhow::Result<Outcome> {
    if a.count == 0 {
        return Err(UsageError("--count must be at least 1".into()).into());
    }
    let names = match &a.names {
        Some(p) => NamePool::from_file(p)?,
        None => NamePool::builtin(),
    };
    let mut spec = BuildSpec::new(a.count, (a.size, a.size), a.seed, &cli.out);
    let (oracle_a, oracle_b) = oracle_backends();
    let work = cli.out.join("backend_work");
    let command = |name: &str, prog: &PathBuf, i2i: bool| -> Box<dyn GeneratorBackend> {
        Box::new(CommandBackend::new(
            name,
            prog,
            Vec::new(),
            work.join(name),
            Capabilities { supports_text_to_image: true, supports_image_to_image: i2i },
        ))
    };
    let (backend_a, backend_b): (Box<dyn GeneratorBackend>, Box<dyn GeneratorBackend>) = match build {
        Some(b) => {
            if let Some(t) = &b.template {
                spec.template = t.clone();
            }
            spec.refine_params.guidance = b.guidance;
            spec.refine_params.strength = b.strength;
            spec.refine_params.steps = b.steps;
            (
                b.distilled_cmd.as_ref().map_or_else(|| Box::new(oracle_a) as _, |p| command("distilled", p, false)),
                b.baseline_cmd.as_ref().map_or_else(|| Box::new(oracle_b) as _, |p| command("baseline", p, true)),
            )
        }
        None => (Box::new(oracle_a), Box::new(oracle_b)),
    };
    let outcome = build_paired_dataset(backend_a.as_ref(), backend_b.as_ref(), &names, &spec)?;
    let n = outcome.manifest.len();
    Ok(Outcome {
        summary: format!("wrote {n} pairs ({} failed) to {}", outcome.failures.len(), cli.out.display()),
        result: json!({
            "pairs": n,
            "failures": outcome.failures.iter().map(|f| json!({"id": f.id, "reason": f.reason})).collect::<Vec<_>>(),
            "manifest": cli.out.join(MANIFEST_FILE),
            "seed": a.seed,
            "size": [a.size, a.size],
            "names": names.source(),
        }),
        dir: cli.out.clone(),
    })
}

fn domain(d: DomainArg) -> Domain {
    match d {
        DomainArg::A => Domain::A,
        DomainArg::B => Domain::B,
    }
}

fn diversity(cli: &Cli, a: &DiversityArgs) -> anyhow::Result<Outcome> {
    let mut sets = Vec::new();
    for c in &a.corpora {
        let (name, dir) = c.split_once('=').ok_or_else(|| UsageError(format!("--corpus expects NAME=DIR, got {c:?}")))?;
        sets.push((name.to_string(), PathBuf::from(dir)));
    }
    let mut dists = Vec::new();
    let mut manifests = Vec::new();
    for (name, dir) in &sets {
        let manifest = read_manifest(dir)?;
        let classifier = MetadataClassifier::read(dir.join(ATTRIBUTES_FILE))?;
        let records = classify_corpus(&manifest, dir, &classifier, domain(a.domain))?;
        dists.push((name.clone(), summarize_distribution(&records)?));
        manifests.push(manifest);
    }
    let tv = if dists.len() >= 2 { compare_distributions(&dists[0].1, &dists[1].1)? } else { BTreeMap::new() };
    std::fs::create_dir_all(&cli.out)?;
    let refs: Vec<(&str, _)> = dists.iter().map(|(n, d)| (n.as_str(), d)).collect();
    std::fs::write(cli.out.join("diversity.csv"), diversity_csv(&refs, &tv))?;
    let mut result = json!({
        "distributions": dists.iter().map(|(n, d)| (n.clone(), serde_json::to_value(d).unwrap_or(Value::Null))).collect::<BTreeMap<_, _>>(),
        "total_variation": tv,
    });
    if a.tsne {
        let embedder = RandomPyramidEmbedder::default();
        let mut vectors = Vec::new();
        let mut groups = Vec::new();
        for (g, ((_, dir), manifest)) in sets.iter().zip(&manifests).enumerate() {
            let images = manifest
                .samples()
                .iter()
                .map(|s| load_image(dir.join(s.path(domain(a.domain)))))
                .collect::<Result<Vec<_>, _>>()?;
            vectors.extend(embed_all(&images, &embedder)?);
            groups.extend(std::iter::repeat_n(g, images.len()));
        }
        let proj = project_embeddings(&vectors, a.perplexity, a.iterations, a.seed)?;
        let mut csv = String::from("index,group,x,y\n");
        for (i, (p, g)) in proj.points.iter().zip(&groups).enumerate() {
            csv.push_str(&format!("{i},{},{},{}\n", sets[*g].0, p[0], p[1]));
        }
        std::fs::write(cli.out.join("tsne.csv"), csv)?;
        if cli.plots {
            let names: Vec<&str> = sets.iter().map(|(n, _)| n.as_str()).collect();
            std::fs::write(cli.out.join("tsne.svg"), scatter_svg(&proj.points, &groups, &names))?;
        }
        result["tsne_final_kl"] = json!(proj.kl_history.last());
    }
    let summary = match tv.get(restore_core::diversity::GENDER) {
        Some(v) => format!("{} corpora analysed; gender TV distance {v:.4}", sets.len()),
        None => format!("{} corpora analysed", sets.len()),
    };
    Ok(Outcome { summary, result, dir: cli.out.clone() })
}

fn train_summary(kind: &str, o: &TrainOutcome) -> Outcome {
    let r = &o.record;
    Outcome {
        summary: format!(
            "{kind} {}: best epoch {} of {}, L={:.4}, SSIM={:.4}",
            r.name, r.best_epoch, r.epochs_run, r.best_loss, r.ssim_full_cycle
        ),
        result: json!({ "record": r, "stopped_early": o.stopped_early, "history": o.history }),
        dir: o.run_dir.clone(),
    }
}

fn pairwise(cli: &Cli, a: &TrainPairwiseArgs) -> anyhow::Result<Outcome> {
    let config = load_config(&a.config, RunConfig::pairwise(), &cli.out)?;
    if config.model != ModelKind::Unet {
        return Err(UsageError("train-pairwise needs model = \"unet\"".into()).into());
    }
    let manifest = read_manifest(&a.data)?;
    let (train, val, _) = split_dataset(&manifest, config.split, config.seed)?;
    if train.is_empty() || val.is_empty() {
        bail!("split left an empty train or validation set ({} / {})", train.len(), val.len());
    }
    let train = PairedData::load(&train, &a.data)?;
    let val = PairedData::load(&val, &a.data)?;
    let extractor = RandomPyramidExtractor::default();
    let opts = TrainOptions { resume: a.resume, ..Default::default() };
    Ok(train_summary("pairwise", &train_pairwise(&config, &train, &val, &extractor, &opts)?))
}

fn load_unpaired(config: &RunConfig, data: &UnpairedArgs) -> anyhow::Result<UnpairedData> {
    let side = |dir: &Path, d: Domain| -> anyhow::Result<(Tensor, Tensor)> {
        let (train, val, _) = split_dataset(&read_manifest(dir)?, config.split, config.seed)?;
        if train.is_empty() || val.is_empty() {
            bail!("{}: split left an empty train or validation set", dir.display());
        }
        Ok((load_domain(&train, dir, d)?, load_domain(&val, dir, d)?))
    };
    let (train_a, val_a) = side(&data.data_a, Domain::A)?;
    let (train_b, val_b) = side(&data.data_b, Domain::B)?;
    Ok(UnpairedData { train_a, train_b, val_a, val_b })
}

fn cyclegan(cli: &Cli, a: &TrainCycleganArgs) -> anyhow::Result<Outcome> {
    let config = load_config(&a.config, RunConfig::cyclegan(), &cli.out)?;
    if config.model != ModelKind::Cyclegan {
        return Err(UsageError("train-cyclegan needs model = \"cyclegan\"".into()).into());
    }
    let data = load_unpaired(&config, &a.data)?;
    let opts = TrainOptions { resume: a.resume, ..Default::default() };
    let kind = if config.cyclegan.use_esa { "esa-cyclegan" } else { "cyclegan" };
    Ok(train_summary(kind, &train_cyclegan(&config, &data, &opts)?))
}

fn grid(cli: &Cli, a: &GridArgs) -> anyhow::Result<Outcome> {
    let outcome = match a.replay {
        Some(which) => {
            let records = match which {
                RecordedGrid::Cyclegan => recorded_cyclegan_grid(),
                RecordedGrid::Esa => recorded_esa_grid(),
            };
            GridOutcome { ranked: rank_records(records), failures: Vec::new() }
        }
        None => {
            let (Some(da), Some(db)) = (&a.data_a, &a.data_b) else {
                return Err(UsageError("grid needs --data-a and --data-b, or --replay".into()).into());
            };
            let base = load_config(&a.config, RunConfig::cyclegan(), &cli.out)?;
            let spec = GridSpec::new(a.lambda.clone(), a.lr.clone())?;
            let data = load_unpaired(&base, &UnpairedArgs { data_a: da.clone(), data_b: db.clone() })?;
            grid_search(&spec, &base, |c| Ok(train_cyclegan(c, &data, &TrainOptions::default())?.record))
        }
    };
    std::fs::create_dir_all(&cli.out)?;
    std::fs::write(cli.out.join(GRID_SUMMARY_FILE), grid_summary_csv(&outcome))?;
    let summary = match outcome.ranked.first() {
        Some(b) => format!(
            "{} cells ranked, {} failed; best lambda={} lr={} L={:.2} SSIM={:.2}",
            outcome.ranked.len(),
            outcome.failures.len(),
            b.lambda_cycle,
            b.learning_rate,
            b.best_loss,
            b.ssim_full_cycle
        ),
        None => format!("no successful cells ({} failed)", outcome.failures.len()),
    };
    Ok(Outcome { summary, result: serde_json::to_value(&outcome)?, dir: cli.out.clone() })
}

fn png_dir(dir: &Path) -> anyhow::Result<Vec<ImageTensor>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(load_image(p)?)).collect()
}

/// Runs a saved model (U-Net head, or the A-to-B CycleGAN generator) over `images`.
pub fn enhance(stem: &Path, images: &[ImageTensor]) -> anyhow::Result<Vec<ImageTensor>> {
    let config = read_sidecar(stem)?.config;
    let expected: BTreeMap<String, String> = match config.model {
        ModelKind::Unet => BTreeMap::from([(UNET_SET.to_string(), config.unet.fingerprint())]),
        ModelKind::Cyclegan => BTreeMap::from([(G_SET.to_string(), config.cyclegan.generator_fingerprint())]),
    };
    let (state, _) = load_checkpoint(stem, &expected)?;
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(8) {
        let refs: Vec<&ImageTensor> = chunk.iter().collect();
        let x = ImageTensor::stack(&refs, &Device::Cpu, DType::F32)?;
        let z = match config.model {
            ModelKind::Unet => unet_forward(&state.params[UNET_SET], &config.unet, &x)?,
            ModelKind::Cyclegan => generator_forward(&state.params[G_SET], &config.cyclegan, &x)?,
        };
        out.extend(ImageTensor::unstack(&z)?);
    }
    Ok(out)
}

fn pair<T: Copy>(v: &[T], flag: &str) -> anyhow::Result<[T; 2]> {
    match v {
        &[a, b] => Ok([a, b]),
        _ => Err(UsageError(format!("{flag} expects exactly two comma-separated values")).into()),
    }
}

fn eval_fid_diff(cli: &Cli, a: &EvalFidDiffArgs) -> anyhow::Result<Outcome> {
    let d = match &a.values {
        Some(v) => {
            let [s, d] = pair(v, "--values")?;
            FidDiff::from_values(s, d)
        }
        None => {
            let need = |p: &Option<PathBuf>, flag: &str| {
                p.clone().ok_or_else(|| anyhow::Error::from(UsageError(format!("missing {flag}"))))
            };
            let mut images = png_dir(&need(&a.images, "--images")?)?;
            if let Some(stem) = &a.checkpoint {
                images = enhance(stem, &images)?;
            }
            let rs = png_dir(&need(&a.ref_schnell, "--ref-schnell")?)?;
            let rd = png_dir(&need(&a.ref_dev, "--ref-dev")?)?;
            fid_diff(&images, &rs, &rd, &RandomPyramidEmbedder::default())?
        }
    };
    let report = MetricReport::new(vec![MetricRow::new(&a.variant, d.fid_schnell, d.fid_dev)])?;
    emit_report(Some(&report), None, &cli.out, false)?;
    Ok(Outcome {
        summary: format!("fid_schnell={:.4} fid_dev={:.4} fid_diff={:.4}", d.fid_schnell, d.fid_dev, d.fid_diff),
        result: json!({ "fid": d, "report": report }),
        dir: cli.out.clone(),
    })
}

fn eval_pair(cli: &Cli, a: &EvalPairArgs) -> anyhow::Result<Outcome> {
    let (mut first, second) = match (&a.data, &a.a, &a.b) {
        (Some(dir), _, _) => {
            let m = read_manifest(dir)?;
            let load = |d: Domain| -> anyhow::Result<Vec<ImageTensor>> {
                m.samples().iter().map(|s| Ok(load_image(dir.join(s.path(d)))?)).collect()
            };
            (load(Domain::A)?, load(Domain::B)?)
        }
        (None, Some(x), Some(y)) => (png_dir(x)?, png_dir(y)?),
        _ => return Err(UsageError("eval-pair needs --data or both --a and --b".into()).into()),
    };
    if first.len() != second.len() || first.is_empty() {
        bail!("image sets must be non-empty and equally long ({} vs {})", first.len(), second.len());
    }
    if let Some(stem) = &a.checkpoint {
        first = enhance(stem, &first)?;
    }
    let s = mean_ssim(&first, &second)?;
    let p: Vec<f64> = first.iter().zip(&second).map(|(x, y)| psnr(x, y)).collect::<Result<_, _>>()?;
    let mean_psnr = p.iter().sum::<f64>() / p.len() as f64;
    Ok(Outcome {
        summary: format!("{} pairs: mean SSIM {s:.4}, mean PSNR {mean_psnr:.2} dB", first.len()),
        result: json!({ "pairs": first.len(), "ssim": s, "psnr": mean_psnr }),
        dir: cli.out.clone(),
    })
}

fn bench(cli: &Cli, a: &BenchArgs) -> anyhow::Result<Outcome> {
    let sizes: Vec<(usize, usize)> = a.sizes.iter().map(|&s| (s, s)).collect();
    let table = if a.replay {
        recorded_timings()
    } else if let Some(ms) = &a.stub_ms {
        let [slow, fast] = pair(ms, "--stub-ms")?;
        let stub = |delay: u64| {
            move |h: usize, w: usize| {
                std::thread::sleep(Duration::from_millis(delay));
                ImageTensor::filled(3, h, w, 0.5)
            }
        };
        let mut p = [Pipeline::new("slow", stub(slow)), Pipeline::new("fast", stub(fast))];
        benchmark_inference(&mut p, &sizes, a.reps, a.warmup)?
    } else {
        let (distilled, baseline) = oracle_backends();
        let prompt = "A professional portrait of Amara Okafor";
        let seeded = |b: &'static dyn GeneratorBackend| move |h: usize, w: usize| b.generate(prompt, 0, (h, w));
        let (d, b): (&'static dyn GeneratorBackend, &'static dyn GeneratorBackend) =
            (Box::leak(Box::new(distilled)), Box::leak(Box::new(baseline)));
        let mut pipelines = vec![Pipeline::new("dev", seeded(b)), Pipeline::new("schnell", seeded(d))];
        if let Some(stem) = &a.head {
            let stem = stem.clone();
            pipelines.push(Pipeline::new("schnell+i2i", seeded(d)).then("head", move |im| {
                enhance(&stem, &[im])
                    .map(|mut v| v.remove(0))
                    .map_err(|e| restore_core::Error::PipelineFailure { name: "head".into(), reason: e.to_string() })
            }));
        }
        benchmark_inference(&mut pipelines, &sizes, a.reps, a.warmup)?
    };
    emit_report(None, Some(&table), &cli.out, cli.plots)?;
    Ok(Outcome { summary: timing_summary(&table), result: json!({ "timing": table }), dir: cli.out.clone() })
}

fn timing_summary(t: &TimingTable) -> String {
    let names = t.pipelines();
    let Some(&size) = t.sizes().last() else {
        return "no timings".into();
    };
    match (names.first(), names.get(1)) {
        (Some(x), Some(y)) => match t.speedup(y, x, size) {
            Some(s) => format!("{} rows; {y} vs {x} at {}x{}: speedup {:.1}%", t.rows.len(), size.0, size.1, 100.0 * s),
            None => format!("{} rows", t.rows.len()),
        },
        _ => format!("{} rows", t.rows.len()),
    }
}

/// `key` from a command's `result.json`, or the document itself when it is a bare value.
fn section(v: Value, key: &str) -> Value {
    match v.get("result").and_then(|r| r.get(key)).or_else(|| v.get(key)) {
        Some(inner) => inner.clone(),
        None => v,
    }
}

fn report(cli: &Cli, a: &ReportArgs) -> anyhow::Result<Outcome> {
    let (metrics, timing) = if a.recorded {
        (Some(recorded_metric_report()), Some(recorded_timings()))
    } else {
        let mut rows = Vec::new();
        for p in &a.metrics {
            let v: Value = serde_json::from_str(&std::fs::read_to_string(p)?)
                .with_context(|| format!("parsing {}", p.display()))?;
            let r: MetricReport = serde_json::from_value(section(v, "report"))
                .map_err(|e| anyhow!("{}: not a metric report: {e}", p.display()))?;
            rows.extend(r.rows);
        }
        let timing = match &a.timing {
            Some(p) => {
                let v: Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
                Some(serde_json::from_value::<TimingTable>(section(v, "timing"))?)
            }
            None => None,
        };
        (Some(MetricReport::new(rows)?), timing)
    };
    let files = emit_report(metrics.as_ref(), timing.as_ref(), &cli.out, cli.plots)?;
    Ok(Outcome {
        summary: format!("wrote {} report files to {}", files.len(), cli.out.display()),
        result: json!({ "files": files }),
        dir: cli.out.clone(),
    })
}

