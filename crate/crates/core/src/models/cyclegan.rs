use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use super::esa::{esa_block, register_esa};
use crate::common::derive_seed;
use crate::nn::{fingerprint, ops, ParamBuilder, ParamSet};
use crate::{Error, Result};

const LRELU: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleGanConfig {
    pub gen_channels: usize,
    pub residual_blocks: usize,
    pub disc_channels: usize,
    pub disc_layers: usize,
    /// Gate every residual block with enhanced spatial attention.
    pub use_esa: bool,
}

impl Default for CycleGanConfig {
    fn default() -> Self {
        Self { gen_channels: 32, residual_blocks: 4, disc_channels: 32, disc_layers: 3, use_esa: false }
    }
}

impl CycleGanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gen_channels < 4 || self.disc_channels < 1 {
            return Err(Error::BadConfig("generator needs >= 4 channels, discriminator >= 1".into()));
        }
        if self.disc_layers == 0 {
            return Err(Error::BadConfig("discriminator needs at least one layer".into()));
        }
        Ok(())
    }

    pub fn generator_fingerprint(&self) -> String {
        fingerprint(&format!(
            "resnet-generator:channels={}:blocks={}:esa={}",
            self.gen_channels, self.residual_blocks, self.use_esa
        ))
    }

    pub fn discriminator_fingerprint(&self) -> String {
        fingerprint(&format!(
            "patch-discriminator:channels={}:layers={}",
            self.disc_channels, self.disc_layers
        ))
    }

    /// Minimum spatial size accepted by the discriminator.
    pub fn disc_min_size(&self) -> usize {
        16usize.max(1 << self.disc_layers)
    }

    /// Score-map size for an `h x w` input: each 4x4/stride-2/pad-1 layer maps
    /// `n` to `floor(n / 2)`, the final 3x3/pad-1 layer keeps the size.
    pub fn score_map_size(&self, h: usize, w: usize) -> (usize, usize) {
        (h >> self.disc_layers, w >> self.disc_layers)
    }
}

pub fn init_generator(config: &CycleGanConfig, seed: u64, dtype: DType) -> Result<ParamSet> {
    config.validate()?;
    let relu = std::f64::consts::SQRT_2;
    let b0 = config.gen_channels;
    let mut b = ParamBuilder::new(seed, dtype);
    b.conv("in", b0, 3, 7, relu)?;
    b.conv("down1", 2 * b0, b0, 3, relu)?;
    b.conv("down2", 4 * b0, 2 * b0, 3, relu)?;
    for i in 0..config.residual_blocks {
        b.conv(&format!("res{i}.conv1"), 4 * b0, 4 * b0, 3, relu)?;
        b.conv(&format!("res{i}.conv2"), 4 * b0, 4 * b0, 3, 1.0)?;
        if config.use_esa {
            register_esa(&mut b, &format!("res{i}.esa"), 4 * b0)?;
        }
    }
    b.conv("up1", 2 * b0, 4 * b0, 3, relu)?;
    b.conv("up2", b0, 2 * b0, 3, relu)?;
    b.conv("out", 3, b0, 7, 0.1)?;
    b.finish(config.generator_fingerprint())
}

/// Downsample x2 -> residual blocks (each followed by ESA when enabled) ->
/// upsample x2. Output is `sigmoid(logit(x) + correction)`, same shape as `x`.
pub fn generator_forward(params: &ParamSet, config: &CycleGanConfig, x: &Tensor) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    if h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
        return Err(Error::ShapeNotDivisible { height: h, width: w, divisor: 4 });
    }
    let norm_relu = |t: Tensor| -> Result<Tensor> { Ok(ops::instance_norm(&t)?.relu()?) };
    let mut hcur = norm_relu(ops::conv(params, "in", x, 1, 3)?)?;
    hcur = norm_relu(ops::conv(params, "down1", &hcur, 2, 1)?)?;
    hcur = norm_relu(ops::conv(params, "down2", &hcur, 2, 1)?)?;
    for i in 0..config.residual_blocks {
        let r = norm_relu(ops::conv(params, &format!("res{i}.conv1"), &hcur, 1, 1)?)?;
        let r = ops::instance_norm(&ops::conv(params, &format!("res{i}.conv2"), &r, 1, 1)?)?;
        hcur = (hcur + r)?;
        if config.use_esa {
            hcur = esa_block(params, &format!("res{i}.esa"), &hcur)?;
        }
    }
    hcur = ops::resize_bilinear(&hcur, h / 2, w / 2)?;
    hcur = norm_relu(ops::conv(params, "up1", &hcur, 1, 1)?)?;
    hcur = ops::resize_bilinear(&hcur, h, w)?;
    hcur = norm_relu(ops::conv(params, "up2", &hcur, 1, 1)?)?;
    let delta = ops::conv(params, "out", &hcur, 1, 3)?;
    ops::sigmoid(&(ops::logit(x)? + delta)?)
}

pub fn init_discriminator(config: &CycleGanConfig, seed: u64, dtype: DType) -> Result<ParamSet> {
    config.validate()?;
    let gain = (2.0 / (1.0 + LRELU * LRELU)).sqrt();
    let mut b = ParamBuilder::new(seed, dtype);
    let mut in_c = 3;
    for i in 0..config.disc_layers {
        let out_c = config.disc_channels << i;
        b.conv(&format!("d{i}"), out_c, in_c, 4, gain)?;
        in_c = out_c;
    }
    b.conv("score", 1, in_c, 3, 1.0)?;
    b.finish(config.discriminator_fingerprint())
}

/// PatchGAN scores, `N x 1 x (H >> layers) x (W >> layers)`.
pub fn discriminator_forward(params: &ParamSet, config: &CycleGanConfig, x: &Tensor) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    let min = config.disc_min_size();
    if h < min || w < min {
        return Err(Error::SpatialTooSmall { height: h, width: w, min });
    }
    let mut hcur = x.affine(2.0, -1.0)?;
    for i in 0..config.disc_layers {
        hcur = ops::conv(params, &format!("d{i}"), &hcur, 2, 1)?;
        if i > 0 {
            hcur = ops::instance_norm(&hcur)?;
        }
        hcur = ops::leaky_relu(&hcur, LRELU)?;
    }
    ops::conv(params, "score", &hcur, 1, 1)
}

/// Both generators and both discriminators.
#[derive(Debug)]
pub struct CycleGanParams {
    pub config: CycleGanConfig,
    /// A -> B
    pub g: ParamSet,
    /// B -> A
    pub f: ParamSet,
    pub d_a: ParamSet,
    pub d_b: ParamSet,
}

impl CycleGanParams {
    pub fn init(config: &CycleGanConfig, seed: u64, dtype: DType) -> Result<Self> {
        Ok(Self {
            config: config.clone(),
            g: init_generator(config, derive_seed(seed, 0), dtype)?,
            f: init_generator(config, derive_seed(seed, 1), dtype)?,
            d_a: init_discriminator(config, derive_seed(seed, 2), dtype)?,
            d_b: init_discriminator(config, derive_seed(seed, 3), dtype)?,
        })
    }

    pub fn a_to_b(&self, x: &Tensor) -> Result<Tensor> {
        generator_forward(&self.g, &self.config, x)
    }

    pub fn b_to_a(&self, x: &Tensor) -> Result<Tensor> {
        generator_forward(&self.f, &self.config, x)
    }
}
