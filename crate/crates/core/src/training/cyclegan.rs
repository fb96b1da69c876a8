use std::collections::BTreeMap;
use std::time::Instant;

use candle_core::{DType, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::checkpoint::{load_checkpoint, save_checkpoint, TrainState};
use super::data::{epoch_order, gather, UnpairedData};
use super::early_stop::{EarlyStopping, StopDecision};
use super::pairwise::{adam_hyper, batch_ranges, finish, write_metrics};
use super::record::EpochMetrics;
use super::{best_stem, last_stem, prepare_run_dir, TrainOptions, TrainOutcome};
use crate::common::{derive_seed, ImageTensor, ModelKind, RunConfig};
use crate::evaluation::mean_ssim;
use crate::losses::{l1_loss, lsgan_d_loss, lsgan_g_loss, total_cyclegan_loss_tensor};
use crate::models::{discriminator_forward, generator_forward, CycleGanConfig, CycleGanParams};
use crate::nn::{ops, ParamSet};
use crate::{Error, Result};

pub const G_SET: &str = "g";
pub const F_SET: &str = "f";
pub const DA_SET: &str = "d_a";
pub const DB_SET: &str = "d_b";
pub const POOL_CAPACITY: usize = 50;

/// Buffer of previously generated images fed to the discriminators.
#[derive(Clone, Debug, Default)]
pub struct ImagePool {
    capacity: usize,
    images: Vec<Tensor>,
}

impl ImagePool {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, images: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// For each image in `batch`: while the pool is filling, store it and pass
    /// it through; afterwards, with probability 1/2 swap it for a stored one.
    pub fn query(&mut self, batch: &Tensor, rng: &mut impl Rng) -> Result<Tensor> {
        let batch = batch.detach();
        if self.capacity == 0 {
            return Ok(batch);
        }
        let mut out = Vec::with_capacity(batch.dim(0)?);
        for i in 0..batch.dim(0)? {
            let img = batch.get(i)?;
            if self.images.len() < self.capacity {
                self.images.push(img.clone());
                out.push(img);
            } else if rng.random_bool(0.5) {
                let j = rng.random_range(0..self.images.len());
                out.push(std::mem::replace(&mut self.images[j], img));
            } else {
                out.push(img);
            }
        }
        Ok(Tensor::stack(&out, 0)?)
    }

    pub fn to_tensor(&self) -> Result<Option<Tensor>> {
        if self.images.is_empty() {
            return Ok(None);
        }
        Ok(Some(Tensor::stack(&self.images, 0)?))
    }

    pub fn from_tensor(capacity: usize, t: Option<&Tensor>) -> Result<Self> {
        let mut pool = Self::new(capacity);
        if let Some(t) = t {
            for i in 0..t.dim(0)? {
                pool.images.push(t.get(i)?);
            }
        }
        Ok(pool)
    }
}

/// Generator-side validation loss and mean full-cycle SSIM between each
/// domain-A image and `F(G(a))`.
pub fn evaluate_cyclegan(
    config: &RunConfig,
    params: &BTreeMap<String, ParamSet>,
    val_a: &Tensor,
    val_b: &Tensor,
) -> Result<(f64, f64)> {
    let cfg = &config.cyclegan;
    let (g, f, d_a, d_b) = (&params[G_SET], &params[F_SET], &params[DA_SET], &params[DB_SET]);
    let (na, nb) = (val_a.dim(0)?, val_b.dim(0)?);
    if na == 0 || nb == 0 {
        return Err(Error::EmptyInput);
    }
    let bs = config.optim.batch_size.max(1);
    // each term is a per-batch mean; weight by batch size and average per domain
    let (mut adv_ab, mut cyc_a, mut adv_ba, mut cyc_b) = (0.0, 0.0, 0.0, 0.0);
    let mut recs = Vec::with_capacity(na);
    for r in batch_ranges(na, bs) {
        let a = val_a.narrow(0, r.start, r.len())?;
        let fake_b = generator_forward(g, cfg, &a)?;
        let rec_a = generator_forward(f, cfg, &fake_b)?;
        adv_ab += ops::scalar(&lsgan_g_loss(&discriminator_forward(d_b, cfg, &fake_b)?)?)? * r.len() as f64;
        cyc_a += ops::scalar(&l1_loss(&rec_a, &a)?)? * r.len() as f64;
        recs.extend(ImageTensor::unstack(&rec_a)?);
    }
    for r in batch_ranges(nb, bs) {
        let b = val_b.narrow(0, r.start, r.len())?;
        let fake_a = generator_forward(f, cfg, &b)?;
        let rec_b = generator_forward(g, cfg, &fake_a)?;
        adv_ba += ops::scalar(&lsgan_g_loss(&discriminator_forward(d_a, cfg, &fake_a)?)?)? * r.len() as f64;
        cyc_b += ops::scalar(&l1_loss(&rec_b, &b)?)? * r.len() as f64;
    }
    let (na_f, nb_f) = (na as f64, nb as f64);
    let loss = adv_ab / na_f + adv_ba / nb_f + config.loss.lambda_cycle * (cyc_a / na_f + cyc_b / nb_f);
    let inputs = ImageTensor::unstack(val_a)?;
    Ok((loss, mean_ssim(&inputs, &recs)?))
}

fn fingerprints(cfg: &CycleGanConfig) -> BTreeMap<String, String> {
    let (g, d) = (cfg.generator_fingerprint(), cfg.discriminator_fingerprint());
    BTreeMap::from([
        (G_SET.to_string(), g.clone()),
        (F_SET.to_string(), g),
        (DA_SET.to_string(), d.clone()),
        (DB_SET.to_string(), d),
    ])
}

fn check(epoch: usize, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::DivergenceDetected { epoch })
    }
}

/// Trains two generators and two discriminators on unaligned domains.
pub fn train_cyclegan(config: &RunConfig, data: &UnpairedData, opts: &TrainOptions) -> Result<TrainOutcome> {
    if config.model != ModelKind::Cyclegan {
        return Err(Error::Config("train_cyclegan needs model = \"cyclegan\"".into()));
    }
    let cfg = &config.cyclegan;
    cfg.validate()?;
    config.loss.validate()?;
    let (na, nb) = (data.train_a.dim(0)?, data.train_b.dim(0)?);
    if na == 0 || nb == 0 {
        return Err(Error::EmptyInput);
    }
    let started = Instant::now();
    let run_dir = prepare_run_dir(config, opts)?;
    let (best, last) = (best_stem(&run_dir), last_stem(&run_dir));

    let mut state = if opts.resume && last.with_extension("json").exists() {
        load_checkpoint(&last, &fingerprints(cfg))?.0
    } else {
        let p = CycleGanParams::init(cfg, derive_seed(config.seed, 0xc1c), DType::F32)?;
        let params = BTreeMap::from([
            (G_SET.to_string(), p.g),
            (F_SET.to_string(), p.f),
            (DA_SET.to_string(), p.d_a),
            (DB_SET.to_string(), p.d_b),
        ]);
        let (l0, s0) = evaluate_cyclegan(config, &params, &data.val_a, &data.val_b)?;
        check(0, l0)?;
        let optim = params.keys().map(|k| (k.clone(), Adam::new(adam_hyper(config)))).collect();
        TrainState {
            epoch: 0,
            seed: config.seed,
            params,
            optim,
            stopper: EarlyStopping::new(config.optim.patience),
            history: vec![EpochMetrics { epoch: 0, train_loss: None, val_loss: l0, val_ssim: s0, seconds: Some(0.0) }],
            extra: BTreeMap::new(),
        }
    };
    let mut pool_a = ImagePool::from_tensor(POOL_CAPACITY, state.extra.get("pool_a"))?;
    let mut pool_b = ImagePool::from_tensor(POOL_CAPACITY, state.extra.get("pool_b"))?;

    // one pass covers the larger domain; the smaller one wraps around
    let n = na.max(nb);
    let bs = config.optim.batch_size.max(1);
    let lambda = config.loss.lambda_cycle;
    let id_w = config.loss.identity_weight;
    let mut stopped_early = false;
    while state.epoch < config.optim.max_epochs {
        if state.epoch > 0 && state.stopper.epochs_since_improvement >= state.stopper.patience {
            stopped_early = true;
            break;
        }
        let epoch = state.epoch + 1;
        let t0 = Instant::now();
        let order_a = epoch_order(na, config.seed, epoch, 0);
        let order_b = epoch_order(nb, config.seed, epoch, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(config.seed, epoch as u64), 2));
        let mut total = 0.0;
        for r in batch_ranges(n, bs) {
            let ia: Vec<usize> = r.clone().map(|i| order_a[i % na]).collect();
            let ib: Vec<usize> = r.clone().map(|i| order_b[i % nb]).collect();
            let a = gather(&data.train_a, &ia)?;
            let b = gather(&data.train_b, &ib)?;
            let p = &state.params;
            let (g, f, d_a, d_b) = (&p[G_SET], &p[F_SET], &p[DA_SET], &p[DB_SET]);

            let fake_b = generator_forward(g, cfg, &a)?;
            let fake_a = generator_forward(f, cfg, &b)?;

            // discriminators first, on detached (pooled) fakes
            let pooled_b = pool_b.query(&fake_b, &mut rng)?;
            let pooled_a = pool_a.query(&fake_a, &mut rng)?;
            let da_loss = lsgan_d_loss(&discriminator_forward(d_a, cfg, &a)?, &discriminator_forward(d_a, cfg, &pooled_a)?)?;
            let db_loss = lsgan_d_loss(&discriminator_forward(d_b, cfg, &b)?, &discriminator_forward(d_b, cfg, &pooled_b)?)?;
            let d_loss = (da_loss + db_loss)?;
            check(epoch, ops::scalar(&d_loss)?)?;
            let grads = d_loss.backward()?;
            state.optim.get_mut(DA_SET).expect("optimizer").step(d_a, &grads)?;
            state.optim.get_mut(DB_SET).expect("optimizer").step(d_b, &grads)?;

            // then generators against the updated discriminators
            let adv_ab = lsgan_g_loss(&discriminator_forward(d_b, cfg, &fake_b)?)?;
            let adv_ba = lsgan_g_loss(&discriminator_forward(d_a, cfg, &fake_a)?)?;
            let cyc = (l1_loss(&generator_forward(f, cfg, &fake_b)?, &a)?
                + l1_loss(&generator_forward(g, cfg, &fake_a)?, &b)?)?;
            let mut g_loss = total_cyclegan_loss_tensor(&adv_ab, &adv_ba, &cyc, lambda)?;
            if id_w > 0.0 {
                let id = (l1_loss(&generator_forward(g, cfg, &b)?, &b)? + l1_loss(&generator_forward(f, cfg, &a)?, &a)?)?;
                g_loss = (g_loss + (id * id_w)?)?;
            }
            let gv = check(epoch, ops::scalar(&g_loss)?)?;
            total += gv * r.len() as f64;
            let grads = g_loss.backward()?;
            state.optim.get_mut(G_SET).expect("optimizer").step(g, &grads)?;
            state.optim.get_mut(F_SET).expect("optimizer").step(f, &grads)?;
        }
        let (val_loss, val_ssim) = evaluate_cyclegan(config, &state.params, &data.val_a, &data.val_b)?;
        check(epoch, val_loss)?;
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
        state.extra.clear();
        if let Some(t) = pool_a.to_tensor()? {
            state.extra.insert("pool_a".into(), t);
        }
        if let Some(t) = pool_b.to_tensor()? {
            state.extra.insert("pool_b".into(), t);
        }
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

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn pool_fills_then_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pool = ImagePool::new(3);
        let batch = |v: f32| Tensor::full(v, (2, 1, 2, 2), &Device::Cpu).unwrap();
        let out = pool.query(&batch(1.0), &mut rng).unwrap();
        assert_eq!(out.dims(), &[2, 1, 2, 2]);
        pool.query(&batch(2.0), &mut rng).unwrap();
        assert_eq!(pool.len(), 3);
        for _ in 0..10 {
            pool.query(&batch(3.0), &mut rng).unwrap();
        }
        assert_eq!(pool.len(), 3);
        let stored = pool.to_tensor().unwrap().unwrap();
        let back = ImagePool::from_tensor(3, Some(&stored)).unwrap();
        assert_eq!(back.len(), 3);
    }
}
