use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use restore_core::evaluation::{benchmark_inference, fid, fit_gaussian, Pipeline};
use restore_core::ImageTensor;

/// Samples `n` points from N(mu, L L^T) and returns them with the exact statistics.
fn draw(rng: &mut ChaCha8Rng, mu: &DVector<f64>, l: &DMatrix<f64>, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let z = DVector::from_fn(mu.len(), |_, _| Distribution::<f64>::sample(&StandardNormal, rng));
            (mu + l * z).iter().copied().collect()
        })
        .collect()
}

#[test]
fn sampled_fid_error_shrinks_with_more_samples() {
    let d = 6;
    let (mut err_1k, mut err_10k) = (0.0, 0.0);
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mu1 = DVector::from_fn(d, |i, _| i as f64 * 0.1);
        let mu2 = DVector::from_fn(d, |i, _| 0.5 - i as f64 * 0.05);
        // diagonal covariances give the closed form without a matrix square root
        let v1: Vec<f64> = (0..d).map(|i| 0.5 + 0.1 * i as f64).collect();
        let v2: Vec<f64> = (0..d).map(|i| 1.5 - 0.2 * i as f64).collect();
        let truth = (&mu1 - &mu2).norm_squared()
            + v1.iter().zip(&v2).map(|(a, b)| a + b - 2.0 * (a * b).sqrt()).sum::<f64>();
        let l1 = DMatrix::from_diagonal(&DVector::from_iterator(d, v1.iter().map(|v| v.sqrt())));
        let l2 = DMatrix::from_diagonal(&DVector::from_iterator(d, v2.iter().map(|v| v.sqrt())));
        for (n, acc) in [(1_000, &mut err_1k), (10_000, &mut err_10k)] {
            let a = fit_gaussian(&draw(&mut rng, &mu1, &l1, n)).unwrap();
            let b = fit_gaussian(&draw(&mut rng, &mu2, &l2, n)).unwrap();
            *acc += (fid(&a, &b).unwrap() - truth).abs() / truth;
        }
    }
    assert!(err_10k < err_1k, "mean rel err 1k {} vs 10k {}", err_1k / 5.0, err_10k / 5.0);
    assert!(err_10k / 5.0 < 0.05);
}

#[test]
fn stub_timings_repeat_within_twenty_percent() {
    let measure = || {
        let sleeper = |h: usize, w: usize| {
            std::thread::sleep(Duration::from_millis(12));
            ImageTensor::filled(3, h, w, 0.0)
        };
        let mut p = [Pipeline::new("stub", sleeper)];
        benchmark_inference(&mut p, &[(16, 16)], 4, 1).unwrap().mean("stub", (16, 16)).unwrap()
    };
    let (a, b) = (measure(), measure());
    assert!((a - b).abs() <= 0.2 * a.min(b), "{a} vs {b}");
}
