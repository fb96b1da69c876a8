use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use super::cbam::{cbam_block, check_reduction, register_cbam};
use crate::nn::{fingerprint, ops, ParamBuilder, ParamSet};
use crate::{Error, Result};

const LRELU: f64 = 0.2;

/// Residual U-Net with a CBAM gate in every block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UNetCBAMConfig {
    /// Number of resolution levels; the deepest runs at `H / 2^(depth-1)`.
    pub depth: usize,
    pub base_channels: usize,
    pub cbam_reduction: usize,
    /// Channel count doubles per level until it reaches this cap.
    pub max_channels: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Init gain of the output correction; small values start near the identity.
    pub head_gain: f64,
}

impl Default for UNetCBAMConfig {
    fn default() -> Self {
        Self {
            depth: 6,
            base_channels: 32,
            cbam_reduction: 4,
            max_channels: 256,
            in_channels: 3,
            out_channels: 3,
            head_gain: 1.0,
        }
    }
}

impl UNetCBAMConfig {
    pub fn channels(&self, level: usize) -> usize {
        (self.base_channels << level.min(16)).min(self.max_channels.max(self.base_channels))
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::BadConfig(format!("U-Net depth {} < 2", self.depth)));
        }
        if self.base_channels < 4 {
            return Err(Error::BadConfig(format!("base_channels {} < 4", self.base_channels)));
        }
        if !(self.head_gain.is_finite() && self.head_gain >= 0.0) {
            return Err(Error::BadConfig(format!("head_gain {} must be finite and >= 0", self.head_gain)));
        }
        if self.in_channels != self.out_channels {
            return Err(Error::BadConfig("in/out channel counts differ".into()));
        }
        for l in 0..self.depth {
            check_reduction(self.channels(l), self.cbam_reduction)?;
        }
        Ok(())
    }

    /// Spatial dims must be multiples of this.
    pub fn divisor(&self) -> usize {
        1 << (self.depth - 1)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&format!("unet-cbam:{}", serde_json::to_string(self).expect("serializable")))
    }
}

fn register_block(b: &mut ParamBuilder, p: &str, in_c: usize, out_c: usize, reduction: usize) -> Result<()> {
    let gain = (2.0 / (1.0 + LRELU * LRELU)).sqrt();
    b.conv(&format!("{p}.conv1"), out_c, in_c, 3, gain)?;
    b.conv(&format!("{p}.conv2"), out_c, out_c, 3, gain)?;
    if in_c != out_c {
        b.conv(&format!("{p}.skip"), out_c, in_c, 1, 1.0)?;
    }
    register_cbam(b, &format!("{p}.cbam"), out_c, reduction)
}

/// conv -> norm -> act -> conv -> norm -> act -> CBAM, then residual add.
fn block(params: &ParamSet, p: &str, x: &Tensor, reduction: usize) -> Result<Tensor> {
    let h = ops::conv(params, &format!("{p}.conv1"), x, 1, 1)?;
    let h = ops::leaky_relu(&ops::instance_norm(&h)?, LRELU)?;
    let h = ops::conv(params, &format!("{p}.conv2"), &h, 1, 1)?;
    let h = ops::leaky_relu(&ops::instance_norm(&h)?, LRELU)?;
    let h = cbam_block(params, &format!("{p}.cbam"), &h, reduction)?;
    let skip_name = format!("{p}.skip");
    let skip = if params.var(&format!("{skip_name}.w")).is_some() {
        ops::conv(params, &skip_name, x, 1, 0)?
    } else {
        x.clone()
    };
    Ok((h + skip)?)
}

pub fn init_unet(config: &UNetCBAMConfig, seed: u64, dtype: DType) -> Result<ParamSet> {
    config.validate()?;
    let mut b = ParamBuilder::new(seed, dtype);
    let mut in_c = config.in_channels;
    for l in 0..config.depth {
        register_block(&mut b, &format!("enc{l}"), in_c, config.channels(l), config.cbam_reduction)?;
        in_c = config.channels(l);
    }
    for l in (0..config.depth - 1).rev() {
        let cat_c = in_c + config.channels(l);
        register_block(&mut b, &format!("dec{l}"), cat_c, config.channels(l), config.cbam_reduction)?;
        in_c = config.channels(l);
    }
    b.conv("head", config.out_channels, in_c, 1, config.head_gain)?;
    b.finish(config.fingerprint())
}

/// Forward pass; `probe` receives the variance of every block output.
pub fn unet_forward_probed(
    params: &ParamSet,
    config: &UNetCBAMConfig,
    x: &Tensor,
    mut probe: Option<&mut Vec<(String, f64)>>,
) -> Result<Tensor> {
    config.validate()?;
    let (_, _, h, w) = x.dims4()?;
    let div = config.divisor();
    if h % div != 0 || w % div != 0 {
        return Err(Error::ShapeNotDivisible { height: h, width: w, divisor: div });
    }
    let mut record = |name: String, t: &Tensor| -> Result<()> {
        if let Some(p) = probe.as_deref_mut() {
            let mean = ops::scalar(t)?;
            p.push((name, ops::scalar(&t.affine(1.0, -mean)?.sqr()?)?));
        }
        Ok(())
    };

    let r = config.cbam_reduction;
    let mut skips = Vec::with_capacity(config.depth);
    let mut hcur = x.clone();
    for l in 0..config.depth {
        if l > 0 {
            hcur = ops::avg_pool2(&hcur)?;
        }
        hcur = block(params, &format!("enc{l}"), &hcur, r)?;
        record(format!("enc{l}"), &hcur)?;
        skips.push(hcur.clone());
    }
    for l in (0..config.depth - 1).rev() {
        let (_, _, sh, sw) = skips[l].dims4()?;
        let up = ops::resize_bilinear(&hcur, sh, sw)?;
        hcur = block(params, &format!("dec{l}"), &Tensor::cat(&[&up, &skips[l]], 1)?, r)?;
        record(format!("dec{l}"), &hcur)?;
    }
    let delta = ops::conv(params, "head", &hcur, 1, 0)?;
    ops::sigmoid(&(ops::logit(x)? + delta)?)
}

/// `N x C x H x W` in, same shape out, values in `[0, 1]`.
///
/// The head predicts a correction in logit space on top of the input; with a
/// small `head_gain` a freshly initialised network starts near the identity.
pub fn unet_forward(params: &ParamSet, config: &UNetCBAMConfig, x: &Tensor) -> Result<Tensor> {
    unet_forward_probed(params, config, x, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn small() -> UNetCBAMConfig {
        UNetCBAMConfig { depth: 3, base_channels: 4, cbam_reduction: 2, ..Default::default() }
    }

    #[test]
    fn channel_schedule_caps() {
        let c = UNetCBAMConfig::default();
        let chans: Vec<usize> = (0..6).map(|l| c.channels(l)).collect();
        assert_eq!(chans, vec![32, 64, 128, 256, 256, 256]);
    }

    #[test]
    fn config_validation() {
        assert!(UNetCBAMConfig { depth: 1, ..small() }.validate().is_err());
        assert!(UNetCBAMConfig { base_channels: 2, ..small() }.validate().is_err());
        assert!(matches!(
            UNetCBAMConfig { cbam_reduction: 3, ..small() }.validate(),
            Err(Error::BadReduction { .. })
        ));
    }

    #[test]
    fn small_net_shapes_and_divisibility() {
        let cfg = small();
        let p = init_unet(&cfg, 0, DType::F32).unwrap();
        let x = Tensor::full(0.3f32, (2, 3, 12, 8), &Device::Cpu).unwrap();
        assert_eq!(unet_forward(&p, &cfg, &x).unwrap().dims(), &[2, 3, 12, 8]);
        let bad = Tensor::zeros((1, 3, 10, 8), DType::F32, &Device::Cpu).unwrap();
        assert!(matches!(unet_forward(&p, &cfg, &bad), Err(Error::ShapeNotDivisible { divisor: 4, .. })));
    }

    #[test]
    fn deterministic_init() {
        let cfg = small();
        let a = init_unet(&cfg, 5, DType::F32).unwrap();
        let b = init_unet(&cfg, 5, DType::F32).unwrap();
        let c = init_unet(&cfg, 6, DType::F32).unwrap();
        assert!(a.bit_equal(&b).unwrap());
        assert!(!a.bit_equal(&c).unwrap());
    }
}
