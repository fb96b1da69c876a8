use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::embed::FeatureEmbedder;
use crate::common::ImageTensor;
use crate::{Error, Result};

/// Eigenvalues below `-INDEFINITE_TOL * max(1, largest eigenvalue)` are treated as
/// a genuinely indefinite product rather than round-off.
pub const INDEFINITE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased (`n - 1`) covariance, symmetrized.
pub fn fit_gaussian(features: &[Vec<f64>]) -> Result<GaussianStats> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewSamples { got: n, min: 2 });
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(Error::DimensionMismatch(d, bad.len()));
    }
    let mut mean = DVector::zeros(d);
    for f in features {
        mean += DVector::from_column_slice(f);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for f in features {
        let x = DVector::from_column_slice(f) - &mean;
        cov.ger(1.0, &x, &x, 1.0);
    }
    cov /= (n - 1) as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianStats { mean, covariance: cov, n })
}

fn clipped_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    for v in eig.eigenvalues.iter_mut() {
        if *v < -INDEFINITE_TOL * scale {
            return Err(Error::NumericallyIndefinite(*v));
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = clipped_eigen(m)?;
    let sqrt_vals = eig.eigenvalues.map(f64::sqrt);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose())
}

/// Fréchet distance between two Gaussians:
/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`, clamped at zero.
///
/// The trace of `(S_a S_b)^(1/2)` is taken from the eigenvalues of the
/// symmetric matrix `S_a^(1/2) S_b S_a^(1/2)`, which is similar to it.
pub fn fid(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let sa = psd_sqrt(&a.covariance)?;
    let inner = &sa * &b.covariance * &sa;
    let eig = clipped_eigen(&inner)?;
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let d = diff + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_sqrt;
    Ok(d.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidDiff {
    pub fid_schnell: f64,
    pub fid_dev: f64,
    pub fid_diff: f64,
}

impl FidDiff {
    pub fn from_values(fid_schnell: f64, fid_dev: f64) -> Self {
        Self { fid_schnell, fid_dev, fid_diff: fid_schnell - fid_dev }
    }

    /// The same measurement with the two reference sets exchanged.
    pub fn swapped(&self) -> Self {
        Self::from_values(self.fid_dev, self.fid_schnell)
    }
}

pub fn embed_all(images: &[ImageTensor], embedder: &dyn FeatureEmbedder) -> Result<Vec<Vec<f64>>> {
    images.iter().map(|im| embedder.embed(im)).collect()
}

/// FID of `images` to each reference set and their difference.
pub fn fid_diff(
    images: &[ImageTensor],
    ref_schnell: &[ImageTensor],
    ref_dev: &[ImageTensor],
    embedder: &dyn FeatureEmbedder,
) -> Result<FidDiff> {
    let min = (embedder.dim() + 1).max(16);
    for set in [images, ref_schnell, ref_dev] {
        if set.len() < min {
            return Err(Error::TooFewSamples { got: set.len(), min });
        }
    }
    let s = fit_gaussian(&embed_all(images, embedder)?)?;
    let rs = fit_gaussian(&embed_all(ref_schnell, embedder)?)?;
    let rd = fit_gaussian(&embed_all(ref_dev, embedder)?)?;
    Ok(FidDiff::from_values(fid(&s, &rs)?, fid(&s, &rd)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: &[f64], cov: &[f64]) -> GaussianStats {
        let d = mean.len();
        GaussianStats { mean: DVector::from_column_slice(mean), covariance: DMatrix::from_row_slice(d, d, cov), n: 2 }
    }

    #[test]
    fn hand_examples() {
        let g = fit_gaussian(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(g.mean[0], 1.0);
        assert_eq!(g.covariance[(0, 0)], 2.0);
        let same = fit_gaussian(&vec![vec![3.0, 1.0]; 4]).unwrap();
        assert!(same.covariance.iter().all(|&v| v == 0.0));
        assert!(matches!(fit_gaussian(&[vec![1.0]]), Err(Error::TooFewSamples { .. })));
        assert_eq!(fid(&stats(&[0.0], &[0.0]), &stats(&[1.0], &[0.0])).unwrap(), 1.0);
    }

    #[test]
    fn permutation_invariant_fit() {
        let pts: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let mut rev = pts.clone();
        rev.reverse();
        let (a, b) = (fit_gaussian(&pts).unwrap(), fit_gaussian(&rev).unwrap());
        assert!((a.mean - b.mean).amax() < 1e-12);
        assert!((a.covariance - b.covariance).amax() < 1e-12);
    }

    #[test]
    fn univariate_closed_form() {
        // (mu1 - mu2)^2 + (s1 - s2)^2 for standard deviations s1, s2
        let a = stats(&[0.5], &[4.0]);
        let b = stats(&[-1.0], &[9.0]);
        assert!((fid(&a, &b).unwrap() - (2.25 + 1.0)).abs() < 1e-12);
        assert!(fid(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let a = stats(&[0.0, 0.0], &[1.0, 0.0, 0.0, -1.0]);
        let b = stats(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(fid(&a, &b), Err(Error::NumericallyIndefinite(_))));
        assert!(matches!(fid(&a, &stats(&[0.0], &[1.0])), Err(Error::DimensionMismatch(2, 1))));
    }

    #[test]
    fn replayed_values() {
        let r = FidDiff::from_values(0.75, 0.34);
        assert!((r.fid_diff - 0.41).abs() < 1e-15);
        assert_eq!(r.swapped().fid_diff, -r.fid_diff);
    }
}
