//! Training objectives.
//!
//! Every loss takes and returns candle tensors so gradients flow through it;
//! `*_value` helpers collapse the result to `f64` for reporting.

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::nn::{ops, RandomPyramid};
use crate::{Error, Result};

/// Multi-scale feature maps used by the perceptual loss.
pub trait PerceptualExtractor: Send + Sync {
    fn features(&self, x: &Tensor) -> Result<Vec<Tensor>>;
    fn descriptor(&self) -> String;
}

/// Frozen fixed-seed three-scale random convolutional pyramid.
pub struct RandomPyramidExtractor {
    pyramid: RandomPyramid,
}

impl RandomPyramidExtractor {
    pub const DEFAULT_SEED: u64 = 0x5eed_1195;

    pub fn new(seed: u64) -> Result<Self> {
        Ok(Self { pyramid: RandomPyramid::new(seed, &[8, 16, 32])? })
    }
}

impl Default for RandomPyramidExtractor {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SEED).expect("fixed pyramid builds")
    }
}

impl PerceptualExtractor for RandomPyramidExtractor {
    fn features(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.pyramid.features(x)
    }

    fn descriptor(&self) -> String {
        self.pyramid.descriptor()
    }
}

/// Which structural term pairs with the perceptual term in the pairwise objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureTerm {
    #[default]
    Gradient,
    L1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_cycle: f64,
    pub grad_weight: f64,
    pub perceptual_weight: f64,
    pub structure: StructureTerm,
    /// Weight of the optional identity-mapping term; 0 disables it.
    pub identity_weight: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cycle: 10.0,
            grad_weight: 1.0,
            perceptual_weight: 1.0,
            structure: StructureTerm::Gradient,
            identity_weight: 0.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_cycle, self.grad_weight, self.perceptual_weight, self.identity_weight];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::BadConfig(format!("loss weights must be finite and >= 0: {all:?}")));
        }
        Ok(())
    }
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch(a.dims().to_vec(), b.dims().to_vec()));
    }
    Ok(())
}

/// Forward differences along width and height (rank-4 tensors).
fn finite_diffs(x: &Tensor) -> Result<(Tensor, Tensor)> {
    let (_, _, h, w) = x.dims4()?;
    let dx = (x.narrow(3, 1, w - 1)? - x.narrow(3, 0, w - 1)?)?;
    let dy = (x.narrow(2, 1, h - 1)? - x.narrow(2, 0, h - 1)?)?;
    Ok((dx, dy))
}

/// Mean of `|grad x - grad z|` pooled over every horizontal and vertical
/// forward difference, channel and sample.
pub fn grad_loss(x: &Tensor, z: &Tensor) -> Result<Tensor> {
    same_shape(x, z)?;
    let (dxx, dyx) = finite_diffs(x)?;
    let (dxz, dyz) = finite_diffs(z)?;
    let n = (dxx.elem_count() + dyx.elem_count()) as f64;
    if n == 0.0 {
        return Ok(x.zeros_like()?.sum_all()?);
    }
    let total = ((dxx - dxz)?.abs()?.sum_all()? + (dyx - dyz)?.abs()?.sum_all()?)?;
    Ok((total / n)?)
}

pub fn l1_loss(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b)?;
    Ok((a - b)?.abs()?.mean_all()?)
}

/// Unit-normalises each position's channel vector.
fn normalize_channels(f: &Tensor) -> Result<Tensor> {
    let norm = (f.sqr()?.sum_keepdim(1)? + 1e-10)?.sqrt()?;
    Ok(f.broadcast_div(&norm)?)
}

/// Mean over scales of the mean absolute difference between channel-normalised features.
pub fn perceptual_loss(y: &Tensor, z: &Tensor, extractor: &dyn PerceptualExtractor) -> Result<Tensor> {
    same_shape(y, z)?;
    let fy = extractor.features(y)?;
    let fz = extractor.features(z)?;
    if fy.is_empty() {
        return Err(Error::BadConfig("extractor produced no feature maps".into()));
    }
    let mut acc: Option<Tensor> = None;
    for (a, b) in fy.iter().zip(&fz) {
        let d = (normalize_channels(a)? - normalize_channels(b)?)?.abs()?.mean_all()?;
        acc = Some(match acc {
            None => d,
            Some(s) => (s + d)?,
        });
    }
    Ok((acc.expect("non-empty") / fy.len() as f64)?)
}

/// `grad_weight * STRUCT(x, z) + perceptual_weight * LPIPS(y, z)` where `x` is
/// the input, `y` the target and `z` the generated image.
pub fn combined_loss(
    x: &Tensor,
    y: &Tensor,
    z: &Tensor,
    extractor: &dyn PerceptualExtractor,
    weights: &LossWeights,
) -> Result<Tensor> {
    same_shape(x, z)?;
    same_shape(y, z)?;
    let structure = match weights.structure {
        StructureTerm::Gradient => grad_loss(x, z)?,
        StructureTerm::L1 => l1_loss(x, z)?,
    };
    let perceptual = perceptual_loss(y, z, extractor)?;
    Ok(((structure * weights.grad_weight)? + (perceptual * weights.perceptual_weight)?)?)
}

/// Least-squares discriminator loss: `0.5 mean((real-1)^2) + 0.5 mean(fake^2)`.
pub fn lsgan_d_loss(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    let r = real.affine(1.0, -1.0)?.sqr()?.mean_all()?;
    let f = fake.sqr()?.mean_all()?;
    Ok(((r + f)? * 0.5)?)
}

/// Least-squares generator loss: `mean((fake-1)^2)`.
pub fn lsgan_g_loss(fake: &Tensor) -> Result<Tensor> {
    Ok(fake.affine(1.0, -1.0)?.sqr()?.mean_all()?)
}

fn check_finite(t: &Tensor) -> Result<()> {
    if !ops::scalar(&t.abs()?)?.is_finite() {
        return Err(Error::NonFiniteScores);
    }
    Ok(())
}

/// `(d_loss, g_loss)` for discriminator scores on real and generated batches.
pub fn adversarial_losses(real_scores: &Tensor, fake_scores: &Tensor) -> Result<(Tensor, Tensor)> {
    check_finite(real_scores)?;
    check_finite(fake_scores)?;
    Ok((lsgan_d_loss(real_scores, fake_scores)?, lsgan_g_loss(fake_scores)?))
}

/// `mean|F(G(a)) - a| + mean|G(F(b)) - b|`.
pub fn cycle_loss<G, F>(g: G, f: F, batch_a: &Tensor, batch_b: &Tensor) -> Result<Tensor>
where
    G: Fn(&Tensor) -> Result<Tensor>,
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let rec_a = f(&g(batch_a)?)?;
    let rec_b = g(&f(batch_b)?)?;
    Ok((l1_loss(&rec_a, batch_a)? + l1_loss(&rec_b, batch_b)?)?)
}

/// Generator-side CycleGAN objective terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleGanComponents {
    pub g_adv_ab: f64,
    pub g_adv_ba: f64,
    pub cycle: f64,
}

/// `g_adv_ab + g_adv_ba + lambda_cycle * cycle`.
pub fn total_cyclegan_loss(c: &CycleGanComponents, weights: &LossWeights) -> Result<f64> {
    if ![c.g_adv_ab, c.g_adv_ba, c.cycle, weights.lambda_cycle].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteScores);
    }
    if weights.lambda_cycle < 0.0 {
        return Err(Error::BadConfig("lambda_cycle must be >= 0".into()));
    }
    Ok(c.g_adv_ab + c.g_adv_ba + weights.lambda_cycle * c.cycle)
}

/// Tensor form of [`total_cyclegan_loss`] for backpropagation.
pub fn total_cyclegan_loss_tensor(
    g_adv_ab: &Tensor,
    g_adv_ba: &Tensor,
    cycle: &Tensor,
    lambda_cycle: f64,
) -> Result<Tensor> {
    Ok(((g_adv_ab + g_adv_ba)? + (cycle * lambda_cycle)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    fn t(v: &[f64], shape: (usize, usize, usize, usize)) -> Tensor {
        Tensor::from_slice(v, shape, &Device::Cpu).unwrap()
    }

    fn val(t: &Tensor) -> f64 {
        t.to_scalar::<f64>().unwrap()
    }

    #[test]
    fn grad_loss_hand_example() {
        let x = t(&[0.0, 1.0, 0.0, 1.0], (1, 1, 2, 2));
        let z = t(&[0.0; 4], (1, 1, 2, 2));
        assert_eq!(val(&grad_loss(&x, &z).unwrap()), 0.5);
    }

    #[test]
    fn grad_loss_ignores_offsets() {
        let a = Tensor::full(0.2f64, (1, 3, 5, 4), &Device::Cpu).unwrap();
        let b = Tensor::full(0.9f64, (1, 3, 5, 4), &Device::Cpu).unwrap();
        assert_eq!(val(&grad_loss(&a, &b).unwrap()), 0.0);
        assert_eq!(val(&grad_loss(&a, &a).unwrap()), 0.0);
        let c = Tensor::zeros((1, 3, 4, 4), DType::F64, &Device::Cpu).unwrap();
        assert!(matches!(grad_loss(&a, &c), Err(Error::ShapeMismatch(..))));
    }

    #[test]
    fn adversarial_cases() {
        let ones = Tensor::ones((2, 1, 3, 3), DType::F64, &Device::Cpu).unwrap();
        let zeros = ones.zeros_like().unwrap();
        let half = (&ones * 0.5).unwrap();
        let (d, g) = adversarial_losses(&ones, &zeros).unwrap();
        assert_eq!((val(&d), val(&g)), (0.0, 1.0));
        let (d, g) = adversarial_losses(&zeros, &ones).unwrap();
        assert_eq!((val(&d), val(&g)), (1.0, 0.0));
        let (d, g) = adversarial_losses(&half, &half).unwrap();
        assert_eq!((val(&d), val(&g)), (0.25, 0.25));
        let nan = Tensor::new(&[f64::NAN], &Device::Cpu).unwrap();
        assert!(matches!(adversarial_losses(&nan, &ones), Err(Error::NonFiniteScores)));
    }

    #[test]
    fn cycle_cases() {
        let zeros = Tensor::zeros((2, 3, 4, 4), DType::F64, &Device::Cpu).unwrap();
        let id = |x: &Tensor| -> Result<Tensor> { Ok(x.clone()) };
        let shift = |x: &Tensor| -> Result<Tensor> { Ok(x.affine(1.0, 0.5)?.clamp(0.0, 1.0)?) };
        assert_eq!(val(&cycle_loss(id, id, &zeros, &zeros).unwrap()), 0.0);
        assert_eq!(val(&cycle_loss(id, shift, &zeros, &zeros).unwrap()), 1.0);
        let up = |x: &Tensor| -> Result<Tensor> { Ok(x.affine(2.0, 0.0)?) };
        let down = |x: &Tensor| -> Result<Tensor> { Ok(x.affine(0.5, 0.0)?) };
        let b = Tensor::full(0.3f64, (1, 3, 4, 4), &Device::Cpu).unwrap();
        assert_eq!(val(&cycle_loss(up, down, &b, &b).unwrap()), 0.0);
    }

    #[test]
    fn total_loss_arithmetic() {
        let c = CycleGanComponents { g_adv_ab: 1.0, g_adv_ba: 1.0, cycle: 0.1 };
        let w = LossWeights { lambda_cycle: 10.0, ..Default::default() };
        assert!((total_cyclegan_loss(&c, &w).unwrap() - 3.0).abs() < 1e-12);
        let w0 = LossWeights { lambda_cycle: 0.0, ..Default::default() };
        assert_eq!(total_cyclegan_loss(&c, &w0).unwrap(), 2.0);
    }

    #[test]
    fn perceptual_basic_properties() {
        let ex = RandomPyramidExtractor::default();
        let y = Tensor::rand(0f64, 1.0, (1, 3, 16, 16), &Device::Cpu).unwrap();
        let z = Tensor::rand(0f64, 1.0, (1, 3, 16, 16), &Device::Cpu).unwrap();
        assert_eq!(val(&perceptual_loss(&y, &y, &ex).unwrap()), 0.0);
        let a = val(&perceptual_loss(&y, &z, &ex).unwrap());
        let b = val(&perceptual_loss(&z, &y, &ex).unwrap());
        assert!(a > 0.0 && a == b);
        let w = LossWeights::default();
        assert_eq!(val(&combined_loss(&y, &y, &y, &ex, &w).unwrap()), 0.0);
        // z = x: only the perceptual term remains
        let c = val(&combined_loss(&z, &y, &z, &ex, &w).unwrap());
        assert!((c - val(&perceptual_loss(&y, &z, &ex).unwrap())).abs() < 1e-15);
    }

    #[test]
    fn perceptual_grows_along_a_direction() {
        use rand::SeedableRng;
        for seed in 0..5u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let ex = RandomPyramidExtractor::default();
            let y: Vec<f64> = (0..3 * 16 * 16).map(|_| rand::Rng::random_range(&mut rng, 0.2..0.8)).collect();
            let d: Vec<f64> = (0..3 * 16 * 16).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let y = t(&y, (1, 3, 16, 16));
            let d = t(&d, (1, 3, 16, 16));
            let losses: Vec<f64> = [0.01, 0.05, 0.1]
                .iter()
                .map(|&s| val(&perceptual_loss(&y, &(&y + (&d * s).unwrap()).unwrap(), &ex).unwrap()))
                .collect();
            assert!(losses[0] > 0.0 && losses[0] < losses[1] && losses[1] < losses[2], "{losses:?}");
        }
    }

    #[test]
    fn combined_composes_hand_examples() {
        let ex = RandomPyramidExtractor::default();
        // columns alternate 0/1: every horizontal difference is +-1, every vertical one 0,
        // and on a square image there are equally many of each
        let cols: Vec<f64> = (0..3 * 8 * 8).map(|i| (i % 2) as f64).collect();
        let x = t(&cols, (1, 3, 8, 8));
        let z = x.zeros_like().unwrap();
        let w = LossWeights::default();
        assert_eq!(val(&combined_loss(&x, &z, &z, &ex, &w).unwrap()), 0.5);
    }
}
