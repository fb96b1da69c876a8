use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use candle_core::DType;

use super::adam::{Adam, AdamHyper};
use super::checkpoint::{load_checkpoint, save_checkpoint, TrainState};
use super::data::{epoch_order, gather, PairedData};
use super::early_stop::{EarlyStopping, StopDecision};
use super::record::{metrics_csv, EpochMetrics, RunRecord};
use super::{best_stem, last_stem, prepare_run_dir, TrainOptions, TrainOutcome};
use crate::common::{derive_seed, ImageTensor, ModelKind, RunConfig};
use crate::evaluation::mean_ssim;
use crate::losses::{combined_loss, PerceptualExtractor};
use crate::models::{init_unet, unet_forward};
use crate::nn::ops;
use crate::{Error, Result};

pub const UNET_SET: &str = "unet";

pub(crate) fn adam_hyper(config: &RunConfig) -> AdamHyper {
    AdamHyper {
        learning_rate: config.optim.learning_rate,
        beta1: config.optim.beta1,
        beta2: config.optim.beta2,
        eps: config.optim.eps,
    }
}

pub(crate) fn batch_ranges(n: usize, batch: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..n.div_ceil(batch)).map(move |b| b * batch..((b + 1) * batch).min(n))
}

/// Mean validation combined loss (weighted by batch size) and mean SSIM of
/// outputs against targets.
pub fn evaluate_pairwise(
    config: &RunConfig,
    params: &crate::nn::ParamSet,
    val: &PairedData,
    extractor: &dyn PerceptualExtractor,
) -> Result<(f64, f64)> {
    let n = val.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let bs = config.optim.batch_size.max(1);
    let mut loss = 0.0;
    let mut outs = Vec::with_capacity(n);
    for r in batch_ranges(n, bs) {
        let x = val.inputs.narrow(0, r.start, r.len())?;
        let y = val.targets.narrow(0, r.start, r.len())?;
        let z = unet_forward(params, &config.unet, &x)?;
        loss += ops::scalar(&combined_loss(&x, &y, &z, extractor, &config.loss)?)? * r.len() as f64;
        outs.extend(ImageTensor::unstack(&z)?);
    }
    let targets = ImageTensor::unstack(&val.targets)?;
    Ok((loss / n as f64, mean_ssim(&outs, &targets)?))
}

fn fingerprints(config: &RunConfig) -> BTreeMap<String, String> {
    BTreeMap::from([(UNET_SET.to_string(), config.unet.fingerprint())])
}

/// Trains the U-Net head on aligned pairs, minimising the combined loss.
pub fn train_pairwise(
    config: &RunConfig,
    train: &PairedData,
    val: &PairedData,
    extractor: &dyn PerceptualExtractor,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    if config.model != ModelKind::Unet {
        return Err(Error::Config("train_pairwise needs model = \"unet\"".into()));
    }
    config.unet.validate()?;
    config.loss.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    let started = Instant::now();
    let run_dir = prepare_run_dir(config, opts)?;
    let (best, last) = (best_stem(&run_dir), last_stem(&run_dir));

    let mut state = if opts.resume && last.with_extension("json").exists() {
        load_checkpoint(&last, &fingerprints(config))?.0
    } else {
        let params = init_unet(&config.unet, derive_seed(config.seed, 0x0e7), DType::F32)?;
        let (l0, s0) = evaluate_pairwise(config, &params, val, extractor)?;
        if !l0.is_finite() {
            return Err(Error::DivergenceDetected { epoch: 0 });
        }
        TrainState {
            epoch: 0,
            seed: config.seed,
            params: BTreeMap::from([(UNET_SET.to_string(), params)]),
            optim: BTreeMap::from([(UNET_SET.to_string(), Adam::new(adam_hyper(config)))]),
            stopper: EarlyStopping::new(config.optim.patience),
            history: vec![EpochMetrics { epoch: 0, train_loss: None, val_loss: l0, val_ssim: s0, seconds: Some(0.0) }],
            extra: BTreeMap::new(),
        }
    };

    let n = train.len();
    let bs = config.optim.batch_size.max(1);
    let mut stopped_early = false;
    while state.epoch < config.optim.max_epochs {
        if state.stopper.epochs_since_improvement >= state.stopper.patience && state.epoch > 0 {
            stopped_early = true;
            break;
        }
        let epoch = state.epoch + 1;
        let t0 = Instant::now();
        let order = epoch_order(n, config.seed, epoch, 0);
        let params = &state.params[UNET_SET];
        let adam = state.optim.get_mut(UNET_SET).expect("optimizer present");
        let mut total = 0.0;
        for r in batch_ranges(n, bs) {
            let idx = &order[r.clone()];
            let x = gather(&train.inputs, idx)?;
            let y = gather(&train.targets, idx)?;
            let z = unet_forward(params, &config.unet, &x)?;
            let loss = combined_loss(&x, &y, &z, extractor, &config.loss)?;
            let lv = ops::scalar(&loss)?;
            if !lv.is_finite() {
                return Err(Error::DivergenceDetected { epoch });
            }
            total += lv * r.len() as f64;
            adam.step(params, &loss.backward()?)?;
        }
        let (val_loss, val_ssim) = evaluate_pairwise(config, params, val, extractor)?;
        if !val_loss.is_finite() {
            return Err(Error::DivergenceDetected { epoch });
        }
        let metric = opts.metric_override.as_ref().map_or(val_loss, |f| f(epoch, val_loss));
        let decision = state.stopper.observe(epoch, metric);
        state.epoch = epoch;
        state.history.push(EpochMetrics {
            epoch,
            train_loss: Some(total / n as f64),
            val_loss: metric,
            val_ssim,
            seconds: Some(t0.elapsed().as_secs_f64()),
        });
        if decision == StopDecision::Improved {
            save_checkpoint(&best, &state, config)?;
        }
        save_checkpoint(&last, &state, config)?;
        write_metrics(&run_dir, &state.history)?;
        if decision == StopDecision::Stop {
            stopped_early = true;
            break;
        }
        if opts.stop_after_epoch == Some(epoch) {
            break;
        }
    }
    write_metrics(&run_dir, &state.history)?;
    finish(config, &state, &run_dir, started, stopped_early)
}

pub(crate) fn write_metrics(run_dir: &Path, history: &[EpochMetrics]) -> Result<()> {
    let path = run_dir.join(super::METRICS_FILE);
    std::fs::write(&path, metrics_csv(history)).map_err(|e| Error::WriteError { path, reason: e.to_string() })
}

pub(crate) fn finish(
    config: &RunConfig,
    state: &TrainState,
    run_dir: &Path,
    started: Instant,
    stopped_early: bool,
) -> Result<TrainOutcome> {
    let best_epoch = state.stopper.best_epoch;
    let best_row = state.history.iter().find(|m| m.epoch == best_epoch);
    let record = RunRecord {
        name: config.name.clone(),
        lambda_cycle: config.loss.lambda_cycle,
        learning_rate: config.optim.learning_rate,
        batch_size: config.optim.batch_size,
        best_epoch,
        best_loss: best_row.map_or(f64::NAN, |m| m.val_loss),
        ssim_full_cycle: best_row.map_or(f64::NAN, |m| m.val_ssim),
        epoch0_loss: state.history.first().map_or(f64::NAN, |m| m.val_loss),
        epochs_run: state.epoch,
        checkpoint: best_stem(run_dir).with_extension("bin"),
        seconds: started.elapsed().as_secs_f64(),
    };
    let path = run_dir.join(super::RECORD_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&record)? + "\n")
        .map_err(|e| Error::WriteError { path, reason: e.to_string() })?;
    Ok(TrainOutcome {
        best_checkpoint: record.checkpoint.clone(),
        record,
        history: state.history.clone(),
        stopped_early,
        run_dir: run_dir.to_path_buf(),
    })
}
