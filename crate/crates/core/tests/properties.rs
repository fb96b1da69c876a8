mod common;

use candle_core::{Device, Tensor};
use proptest::prelude::*;
use restore_core::losses::{combined_loss, cycle_loss, grad_loss, perceptual_loss, LossWeights, RandomPyramidExtractor};

fn val(t: Tensor) -> f64 {
    t.to_scalar::<f64>().unwrap()
}

/// A `1 x 3 x 8 x 8` tensor with entries on the 1/64 grid, so sums and
/// differences of them stay exact in f64.
fn grid_image() -> impl Strategy<Value = Tensor> {
    prop::collection::vec(0u8..=64, 192).prop_map(|v| {
        let v: Vec<f64> = v.into_iter().map(|k| k as f64 / 64.0).collect();
        Tensor::from_vec(v, (1, 3, 8, 8), &Device::Cpu).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn losses_are_nonnegative(seed in any::<u64>()) {
        let ex = RandomPyramidExtractor::default();
        let [x, y, z] = [0, 1, 2].map(|k| common::uniform(seed.wrapping_add(k), &[1, 3, 8, 8], 0.0, 1.0));
        prop_assert!(val(grad_loss(&x, &z).unwrap()) >= 0.0);
        prop_assert!(val(perceptual_loss(&y, &z, &ex).unwrap()) >= 0.0);
        prop_assert!(val(combined_loss(&x, &y, &z, &ex, &LossWeights::default()).unwrap()) >= 0.0);
        let g = |t: &Tensor| Ok(t.sqr()?);
        let f = |t: &Tensor| Ok(t.affine(0.5, 0.25)?);
        prop_assert!(val(cycle_loss(g, f, &x, &y).unwrap()) >= 0.0);
    }

    #[test]
    fn grad_loss_ignores_a_shared_offset(x in grid_image(), z in grid_image(), k in 0u8..=64) {
        let c = k as f64 / 64.0;
        let base = val(grad_loss(&x, &z).unwrap());
        let shifted = val(grad_loss(&x.affine(1.0, c).unwrap(), &z.affine(1.0, c).unwrap()).unwrap());
        prop_assert_eq!(base, shifted);
    }

    #[test]
    fn cycle_loss_vanishes_for_inverse_maps(a in grid_image(), b in grid_image(), p in -3i32..=3) {
        let s = 2f64.powi(p);
        let g = move |t: &Tensor| Ok(t.affine(s, 0.0)?);
        let f = move |t: &Tensor| Ok(t.affine(1.0 / s, 0.0)?);
        prop_assert_eq!(val(cycle_loss(g, f, &a, &b).unwrap()), 0.0);
    }
}
