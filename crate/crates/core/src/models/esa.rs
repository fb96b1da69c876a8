use candle_core::{DType, Tensor};

use crate::nn::{ops, ParamBuilder, ParamSet};
use crate::{Error, Result};

/// Minimum spatial extent accepted by the gate.
pub const ESA_MIN_SIZE: usize = 8;
const POOL: usize = 4;

fn reduced(channels: usize) -> usize {
    (channels / 4).max(1)
}

pub fn register_esa(b: &mut ParamBuilder, prefix: &str, channels: usize) -> Result<()> {
    let f = reduced(channels);
    let relu_gain = std::f64::consts::SQRT_2;
    b.conv(&format!("{prefix}.reduce"), f, channels, 1, 1.0)?;
    b.conv(&format!("{prefix}.conv1"), f, f, 3, relu_gain)?;
    b.conv(&format!("{prefix}.conv2"), f, f, 3, relu_gain)?;
    b.conv(&format!("{prefix}.conv3"), f, f, 3, 1.0)?;
    b.conv(&format!("{prefix}.expand"), channels, f, 1, 1.0)
}

/// The ESA gate in `[0, 1]`, shaped like `x`:
/// 1x1 reduction to C/4, 4x4 max pooling, three 3x3 convs, bilinear upsampling
/// back to `H x W`, 1x1 expansion to C, sigmoid.
pub fn esa_gate(params: &ParamSet, prefix: &str, x: &Tensor) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    if h < ESA_MIN_SIZE || w < ESA_MIN_SIZE {
        return Err(Error::SpatialTooSmall { height: h, width: w, min: ESA_MIN_SIZE });
    }
    let r = ops::conv(params, &format!("{prefix}.reduce"), x, 1, 0)?;
    let p = r.max_pool2d(POOL)?;
    let a = ops::conv(params, &format!("{prefix}.conv1"), &p, 1, 1)?.relu()?;
    let a = ops::conv(params, &format!("{prefix}.conv2"), &a, 1, 1)?.relu()?;
    let a = ops::conv(params, &format!("{prefix}.conv3"), &a, 1, 1)?;
    let up = ops::resize_bilinear(&a, h, w)?;
    ops::sigmoid(&ops::conv(params, &format!("{prefix}.expand"), &up, 1, 0)?)
}

pub fn esa_block(params: &ParamSet, prefix: &str, x: &Tensor) -> Result<Tensor> {
    Ok((x * esa_gate(params, prefix, x)?)?)
}

/// An ESA gate with its own parameters.
pub struct EsaBlock {
    params: ParamSet,
}

impl EsaBlock {
    pub fn new(channels: usize, seed: u64, dtype: DType) -> Result<Self> {
        let mut b = ParamBuilder::new(seed, dtype);
        register_esa(&mut b, "esa", channels)?;
        Ok(Self { params: b.finish(crate::nn::fingerprint(&format!("esa:{channels}")))? })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        esa_block(&self.params, "esa", x)
    }

    pub fn gate(&self, x: &Tensor) -> Result<Tensor> {
        esa_gate(&self.params, "esa", x)
    }
}
