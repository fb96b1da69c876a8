use candle_core::{DType, Tensor};

use crate::nn::{ops, ParamBuilder, ParamSet};
use crate::{Error, Result};

pub(crate) fn check_reduction(channels: usize, reduction: usize) -> Result<()> {
    if reduction == 0 || channels % reduction != 0 || channels / reduction == 0 {
        return Err(Error::BadReduction { channels, reduction });
    }
    Ok(())
}

/// Registers the shared bottleneck (`fc1`, `fc2`) and the 7x7 spatial conv under `{prefix}`.
pub fn register_cbam(b: &mut ParamBuilder, prefix: &str, channels: usize, reduction: usize) -> Result<()> {
    check_reduction(channels, reduction)?;
    let hidden = channels / reduction;
    b.conv(&format!("{prefix}.fc1"), hidden, channels, 1, std::f64::consts::SQRT_2)?;
    b.conv(&format!("{prefix}.fc2"), channels, hidden, 1, 1.0)?;
    b.conv(&format!("{prefix}.spatial"), 1, 2, 7, 1.0)
}

/// Channel mask (`N x C x 1 x 1`) and spatial mask (`N x 1 x H x W`), both in `[0, 1]`.
/// The spatial mask is computed on the channel-gated features.
pub fn cbam_masks(params: &ParamSet, prefix: &str, x: &Tensor, reduction: usize) -> Result<(Tensor, Tensor)> {
    let (_, c, _, _) = x.dims4()?;
    check_reduction(c, reduction)?;
    let mlp = |d: &Tensor| -> Result<Tensor> {
        let h = ops::conv(params, &format!("{prefix}.fc1"), d, 1, 0)?.relu()?;
        ops::conv(params, &format!("{prefix}.fc2"), &h, 1, 0)
    };
    let avg = x.mean_keepdim((2, 3))?;
    let max = ops::spatial_max(x)?;
    let channel_mask = ops::sigmoid(&(mlp(&avg)? + mlp(&max)?)?)?;
    let gated = x.broadcast_mul(&channel_mask)?;

    let desc = Tensor::cat(&[gated.mean_keepdim(1)?, gated.max_keepdim(1)?], 1)?;
    let spatial_mask = ops::sigmoid(&ops::conv(params, &format!("{prefix}.spatial"), &desc, 1, 3)?)?;
    Ok((channel_mask, spatial_mask))
}

/// `x * channel_mask * spatial_mask`.
pub fn cbam_block(params: &ParamSet, prefix: &str, x: &Tensor, reduction: usize) -> Result<Tensor> {
    let (cm, sm) = cbam_masks(params, prefix, x, reduction)?;
    Ok(x.broadcast_mul(&cm)?.broadcast_mul(&sm)?)
}

/// A CBAM gate with its own parameters.
pub struct CbamBlock {
    params: ParamSet,
    reduction: usize,
}

impl CbamBlock {
    pub fn new(channels: usize, reduction: usize, seed: u64, dtype: DType) -> Result<Self> {
        let mut b = ParamBuilder::new(seed, dtype);
        register_cbam(&mut b, "cbam", channels, reduction)?;
        let fp = crate::nn::fingerprint(&format!("cbam:{channels}:{reduction}"));
        Ok(Self { params: b.finish(fp)?, reduction })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        cbam_block(&self.params, "cbam", x, self.reduction)
    }

    pub fn masks(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        cbam_masks(&self.params, "cbam", x, self.reduction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(seed: u64, shape: (usize, usize, usize, usize)) -> Tensor {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = shape.0 * shape.1 * shape.2 * shape.3;
        let v: Vec<f64> = (0..n).map(|_| 3.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let block = CbamBlock::new(8, 4, 1, DType::F64).unwrap();
        let x = Tensor::zeros((2, 8, 6, 5), DType::F64, &Device::Cpu).unwrap();
        let y = block.forward(&x).unwrap();
        assert_eq!(y.dims(), x.dims());
        assert_eq!(y.abs().unwrap().sum_all().unwrap().to_scalar::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn bad_reduction() {
        assert!(matches!(
            CbamBlock::new(8, 3, 0, DType::F32),
            Err(Error::BadReduction { channels: 8, reduction: 3 })
        ));
        let block = CbamBlock::new(8, 4, 0, DType::F64).unwrap();
        let x = Tensor::zeros((1, 6, 4, 4), DType::F64, &Device::Cpu).unwrap();
        assert!(matches!(cbam_block(block.params(), "cbam", &x, 4), Err(Error::BadReduction { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gates_never_amplify(seed in any::<u64>(), h in 1usize..9, w in 1usize..9) {
            let block = CbamBlock::new(8, 2, seed, DType::F64).unwrap();
            let x = random(seed ^ 0xabc, (2, 8, h, w));
            let y = block.forward(&x).unwrap();
            let (cm, sm) = block.masks(&x).unwrap();
            for m in [cm, sm] {
                let v: Vec<f64> = m.flatten_all().unwrap().to_vec1().unwrap();
                prop_assert!(v.iter().all(|g| (0.0..=1.0).contains(g)));
            }
            let xs: Vec<f64> = x.flatten_all().unwrap().to_vec1().unwrap();
            let ys: Vec<f64> = y.flatten_all().unwrap().to_vec1().unwrap();
            prop_assert!(xs.iter().zip(&ys).all(|(a, b)| b.abs() <= a.abs()));
        }
    }
}
