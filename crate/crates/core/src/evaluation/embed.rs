use candle_core::{DType, Device};

use crate::common::ImageTensor;
use crate::nn::RandomPyramid;
use crate::Result;

/// Maps an image to a fixed-length feature vector.
pub trait FeatureEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn descriptor(&self) -> String;
    fn embed(&self, image: &ImageTensor) -> Result<Vec<f64>>;
}

/// Frozen random convolutional pyramid with per-channel RMS pooling, giving a
/// 64-dimensional embedding (16 + 16 + 32 channels).
pub struct RandomPyramidEmbedder {
    pyramid: RandomPyramid,
}

impl RandomPyramidEmbedder {
    pub const DEFAULT_SEED: u64 = 0xe3b_ed00;
    pub const CHANNELS: [usize; 3] = [16, 16, 32];

    pub fn new(seed: u64) -> Result<Self> {
        Ok(Self { pyramid: RandomPyramid::new(seed, &Self::CHANNELS)? })
    }
}

impl Default for RandomPyramidEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SEED).expect("fixed pyramid builds")
    }
}

impl FeatureEmbedder for RandomPyramidEmbedder {
    fn dim(&self) -> usize {
        Self::CHANNELS.iter().sum()
    }

    fn descriptor(&self) -> String {
        format!("rms-pooled {}", self.pyramid.descriptor())
    }

    fn embed(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        let x = if image.channels() == 3 {
            image.to_tensor(&Device::Cpu, DType::F32)?
        } else {
            image.to_tensor(&Device::Cpu, DType::F32)?.repeat((1, 3, 1, 1))?
        };
        let mut out = Vec::with_capacity(self.dim());
        for level in self.pyramid.features(&x)? {
            let rms = level.sqr()?.mean((2, 3))?.sqrt()?.flatten_all()?.to_dtype(DType::F64)?;
            out.extend(rms.to_vec1::<f64>()?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::procedural_oracle_pair;

    #[test]
    fn fixed_dim_finite_deterministic() {
        let e = RandomPyramidEmbedder::default();
        let (a, _) = procedural_oracle_pair(1, (64, 64)).unwrap();
        let v = e.embed(&a).unwrap();
        assert_eq!(v.len(), 64);
        assert!(v.iter().all(|x| x.is_finite()));
        assert_eq!(v, RandomPyramidEmbedder::default().embed(&a).unwrap());
        let g = ImageTensor::filled(1, 32, 32, 0.3).unwrap();
        assert_eq!(e.embed(&g).unwrap().len(), 64);
    }
}
