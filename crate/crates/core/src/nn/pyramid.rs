use candle_core::{DType, Tensor};

use super::ops;
use super::{ParamBuilder, ParamSet};
use crate::Result;

/// A frozen, fixed-seed stack of 3x3 convolutions with `tanh` activations and
/// 2x2 average pooling between levels.
///
/// First-level filters are zero-mean, so flat regions produce no response and
/// the first scale measures local texture only.
pub struct RandomPyramid {
    channels: Vec<usize>,
    f64_params: ParamSet,
    f32_params: ParamSet,
    seed: u64,
}

impl RandomPyramid {
    pub fn new(seed: u64, channels: &[usize]) -> Result<Self> {
        let mut b = ParamBuilder::new(seed, DType::F64);
        let mut in_c = 3;
        for (l, &c) in channels.iter().enumerate() {
            b.conv(&format!("l{l}"), c, in_c, 3, 1.5)?;
            in_c = c;
        }
        let mut tensors = b.finish(String::new())?.tensors()?;
        let w0 = tensors.remove("l0.w").expect("level 0 registered");
        let centred = w0.broadcast_sub(&w0.mean_keepdim((1, 2, 3))?)?;
        tensors.insert("l0.w".into(), centred);
        let fp = super::fingerprint(&format!("random-pyramid:{seed}:{channels:?}"));
        let f64_params = ParamSet::from_tensors(fp, tensors)?;
        let f32_params = f64_params.to_dtype(DType::F32)?;
        Ok(Self { channels: channels.to_vec(), f64_params, f32_params, seed })
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn descriptor(&self) -> String {
        format!("random-pyramid(seed={}, channels={:?})", self.seed, self.channels)
    }

    /// One feature map per level for an `N x 3 x H x W` batch in `[0, 1]`.
    pub fn features(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let (params, x) = match x.dtype() {
            DType::F64 => (&self.f64_params, x.clone()),
            DType::F32 => (&self.f32_params, x.clone()),
            _ => (&self.f32_params, x.to_dtype(DType::F32)?),
        };
        let mut h = x.affine(2.0, -1.0)?;
        let mut out = Vec::with_capacity(self.channels.len());
        for l in 0..self.channels.len() {
            if l > 0 {
                h = ops::avg_pool2(&h)?;
            }
            h = ops::conv(params, &format!("l{l}"), &h, 1, 1)?.tanh()?;
            out.push(h.clone());
        }
        Ok(out)
    }
}
