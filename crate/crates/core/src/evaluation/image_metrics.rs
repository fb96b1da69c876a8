use crate::common::ImageTensor;
use crate::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_same(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if a.dims() != b.dims() {
        let (x, y) = (a.dims(), b.dims());
        return Err(Error::ShapeMismatch(vec![x.0, x.1, x.2], vec![y.0, y.1, y.2]));
    }
    Ok(())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable valid-mode filtering of an `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Windowed SSIM (11x11 Gaussian, sigma 1.5, unit dynamic range) averaged over
/// valid windows and channels.
pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_same(a, b)?;
    let (c, h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::SpatialTooSmall { height: h, width: w, min: SSIM_WINDOW });
    }
    let k = gaussian_window();
    let (c1, c2) = (K1 * K1, K2 * K2);
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = a.plane(ch).iter().map(|&v| v as f64).collect();
        let pb: Vec<f64> = b.plane(ch).iter().map(|&v| v as f64).collect();
        let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            pa.iter().zip(&pb).map(|(&x, &y)| f(x, y)).collect()
        };
        let mu_a = filter_valid(&pa, h, w, &k);
        let mu_b = filter_valid(&pb, h, w, &k);
        let e_aa = filter_valid(&prod(&|x, _| x * x), h, w, &k);
        let e_bb = filter_valid(&prod(&|_, y| y * y), h, w, &k);
        let e_ab = filter_valid(&prod(&|x, y| x * y), h, w, &k);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / c as f64)
}

/// Mean SSIM over aligned image lists.
pub fn mean_ssim(a: &[ImageTensor], b: &[ImageTensor]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += ssim(x, y)?;
    }
    Ok(s / a.len() as f64)
}

/// `10 log10(1 / MSE)` in decibels; identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_same(a, b)?;
    let n = a.data().len() as f64;
    let mse = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(c: usize, h: usize, w: usize, f: impl FnMut(usize) -> f32) -> ImageTensor {
        ImageTensor::new(c, h, w, (0..c * h * w).map(f).collect()).unwrap()
    }

    #[test]
    fn constant_images_closed_form() {
        let a = ImageTensor::filled(3, 16, 16, 0.0).unwrap();
        let b = ImageTensor::filled(3, 16, 16, 1.0).unwrap();
        let c1 = 1e-4;
        assert!((ssim(&a, &b).unwrap() - c1 / (1.0 + c1)).abs() < 1e-12);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_small_and_mismatch() {
        let a = ImageTensor::filled(1, 10, 20, 0.0).unwrap();
        assert!(matches!(ssim(&a, &a), Err(Error::SpatialTooSmall { .. })));
        let b = ImageTensor::filled(1, 10, 21, 0.0).unwrap();
        assert!(matches!(psnr(&a, &b), Err(Error::ShapeMismatch(..))));
    }

    #[test]
    fn psnr_values() {
        let a = ImageTensor::filled(3, 4, 4, 0.25).unwrap();
        let b = ImageTensor::filled(3, 4, 4, 0.75).unwrap();
        assert!((psnr(&a, &b).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-12);
        assert!((psnr(&a, &b).unwrap() - 6.0206).abs() < 1e-4);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let mut last = 0.0;
        for d in [0.4f32, 0.2, 0.1, 0.05] {
            let c = ImageTensor::filled(3, 4, 4, 0.25 + d).unwrap();
            let p = psnr(&a, &c).unwrap();
            assert!(p > last);
            last = p;
        }
    }

    /// Direct per-window evaluation without separable filtering.
    fn ssim_brute(a: &ImageTensor, b: &ImageTensor) -> f64 {
        let (c, h, w) = a.dims();
        let k = gaussian_window();
        let mut total = 0.0;
        for ch in 0..c {
            let mut sum = 0.0;
            let mut n = 0;
            for y in 0..=h - 11 {
                for x in 0..=w - 11 {
                    let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for i in 0..11 {
                        for j in 0..11 {
                            let wt = k[i] * k[j];
                            let va = a.get(ch, y + i, x + j) as f64;
                            let vb = b.get(ch, y + i, x + j) as f64;
                            ma += wt * va;
                            mb += wt * vb;
                            saa += wt * va * va;
                            sbb += wt * vb * vb;
                            sab += wt * va * vb;
                        }
                    }
                    let (c1, c2) = (1e-4, 9e-4);
                    sum += ((2.0 * ma * mb + c1) * (2.0 * (sab - ma * mb) + c2))
                        / ((ma * ma + mb * mb + c1) * (saa - ma * ma + sbb - mb * mb + c2));
                    n += 1;
                }
            }
            total += sum / n as f64;
        }
        total / c as f64
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ssim_symmetric_bounded_and_matches_brute_force(seed in any::<u64>()) {
            let mut s = seed | 1;
            let mut next = move || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s >> 40) as f32 / (1u64 << 24) as f32 };
            let a = img(3, 14, 13, |_| next());
            let b = img(3, 14, 13, |_| next());
            let ab = ssim(&a, &b).unwrap();
            prop_assert!((ab - ssim(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
            prop_assert!((ab - ssim_brute(&a, &b)).abs() < 1e-10);
        }
    }
}
