use candle_core::{DType, Tensor, D};

use super::ParamSet;
use crate::Result;

/// Convolution with the `{name}.w` / `{name}.b` pair from `params`.
pub fn conv(params: &ParamSet, name: &str, x: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let w = params.get(&format!("{name}.w"))?;
    let b = params.get(&format!("{name}.b"))?;
    let y = x.conv2d(w, padding, stride, 1, 1)?;
    Ok(y.broadcast_add(&b.reshape((1, b.elem_count(), 1, 1))?)?)
}

/// Per-sample, per-channel normalization over the spatial dims, no affine terms.
pub fn instance_norm(x: &Tensor) -> Result<Tensor> {
    let mean = x.mean_keepdim((2, 3))?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim((2, 3))?;
    Ok(centered.broadcast_div(&(var + 1e-5)?.sqrt()?)?)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok((x.relu()? - (x.neg()?.relu()? * slope)?)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::sigmoid(x)?)
}

/// `log(x / (1 - x))` after clamping into `[1e-3, 1 - 1e-3]`.
pub fn logit(x: &Tensor) -> Result<Tensor> {
    let x = x.clamp(1e-3, 1.0 - 1e-3)?;
    Ok((x.log()? - x.affine(-1.0, 1.0)?.log()?)?)
}

/// Non-overlapping 2x2 average pooling.
pub fn avg_pool2(x: &Tensor) -> Result<Tensor> {
    Ok(x.avg_pool2d(2)?)
}

/// Interpolation weights (`out x in`) for half-pixel-centred bilinear resampling.
fn interp_matrix(out: usize, inp: usize) -> Vec<f64> {
    let mut m = vec![0.0; out * inp];
    let scale = inp as f64 / out as f64;
    for o in 0..out {
        let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
        let i0 = (src.floor() as usize).min(inp - 1);
        let i1 = (i0 + 1).min(inp - 1);
        let frac = src - i0 as f64;
        m[o * inp + i0] += 1.0 - frac;
        m[o * inp + i1] += frac;
    }
    m
}

/// Bilinear resize of an `N x C x H x W` tensor, written as two matmuls so it
/// stays differentiable.
pub fn resize_bilinear(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let (dev, dtype) = (x.device(), x.dtype());
    let mw = Tensor::from_vec(interp_matrix(out_w, w), (out_w, w), dev)?.to_dtype(dtype)?.t()?;
    let mh = Tensor::from_vec(interp_matrix(out_h, h), (out_h, h), dev)?.to_dtype(dtype)?.t()?;
    let y = x.contiguous()?.reshape((n * c * h, w))?.matmul(&mw.contiguous()?)?;
    let y = y.reshape((n, c, h, out_w))?.transpose(2, 3)?.contiguous()?;
    let y = y.reshape((n * c * out_w, h))?.matmul(&mh.contiguous()?)?;
    Ok(y.reshape((n, c, out_w, out_h))?.transpose(2, 3)?.contiguous()?)
}

/// Mean over every element, as `f64`.
pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.mean_all()?.to_scalar::<f64>()?)
}

/// Per-sample max over the spatial dims, keeping `N x C x 1 x 1`.
pub fn spatial_max(x: &Tensor) -> Result<Tensor> {
    let (n, c, _, _) = x.dims4()?;
    Ok(x.flatten_from(2)?.max_keepdim(D::Minus1)?.reshape((n, c, 1, 1))?)
}
