use super::{keyed_hash, DatasetManifest};
use crate::{Error, Result};

/// Train/validation/test fractions.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.9, val: 0.05, test: 0.05 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        let ok = parts.iter().all(|r| r.is_finite() && *r >= 0.0)
            && (parts.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::BadRatios(parts))
        }
    }
}

/// Splits by hashing each sample id with `seed` into `[0, 1)` and bucketing by
/// cumulative ratio, so membership never depends on manifest order.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest)> {
    ratios.validate()?;
    let parts = [ratios.train, ratios.val, ratios.test];
    let last_nonempty = parts.iter().rposition(|r| *r > 0.0).unwrap_or(0);
    let assign = |id: &str| {
        let u = (keyed_hash(seed, id.as_bytes()) >> 11) as f64 / (1u64 << 53) as f64;
        let b = if u < parts[0] {
            0
        } else if u < parts[0] + parts[1] {
            1
        } else {
            2
        };
        // rounding in the cumulative sum can land past the last non-empty bucket
        if parts[b] == 0.0 {
            last_nonempty
        } else {
            b
        }
    };
    Ok((
        manifest.filtered(|s| assign(&s.id) == 0),
        manifest.filtered(|s| assign(&s.id) == 1),
        manifest.filtered(|s| assign(&s.id) == 2),
    ))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    use super::*;
    use crate::common::{PairedSample, RefineParams};

    fn manifest(ids: impl IntoIterator<Item = String>) -> DatasetManifest {
        let samples = ids
            .into_iter()
            .map(|id| PairedSample {
                source_path: format!("a/{id}.png").into(),
                target_path: format!("b/{id}.png").into(),
                id,
                prompt: String::new(),
                seed: 0,
                generator_params: RefineParams::default(),
            })
            .collect();
        DatasetManifest::new(0, samples).unwrap()
    }

    fn ids(m: &DatasetManifest) -> BTreeSet<String> {
        m.samples().iter().map(|s| s.id.clone()).collect()
    }

    #[test]
    fn all_train() {
        let m = manifest((0..20).map(|i| format!("{i:04}")));
        let r = SplitRatios { train: 1.0, val: 0.0, test: 0.0 };
        let (tr, va, te) = split_dataset(&m, r, 3).unwrap();
        assert_eq!(tr.len(), 20);
        assert!(va.is_empty() && te.is_empty());
    }

    #[test]
    fn shuffled_order_keeps_membership() {
        let names: Vec<String> = (0..100).map(|i| format!("sample-{i:03}")).collect();
        let mut shuffled = names.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(99));
        let (a, b) = (manifest(names), manifest(shuffled));
        let (t1, v1, e1) = split_dataset(&a, SplitRatios::default(), 7).unwrap();
        let (t2, v2, e2) = split_dataset(&b, SplitRatios::default(), 7).unwrap();
        assert_eq!(ids(&t1), ids(&t2));
        assert_eq!(ids(&v1), ids(&v2));
        assert_eq!(ids(&e1), ids(&e2));
        assert_eq!(split_dataset(&a, SplitRatios::default(), 7).unwrap().0, t1);
    }

    #[test]
    fn bad_ratios() {
        let m = manifest(["x".to_string()]);
        for r in [
            SplitRatios { train: 0.5, val: 0.5, test: 0.5 },
            SplitRatios { train: 1.2, val: -0.2, test: 0.0 },
            SplitRatios { train: f64::NAN, val: 0.0, test: 1.0 },
        ] {
            assert!(matches!(split_dataset(&m, r, 0), Err(Error::BadRatios(_))));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exact_partition(n in 0usize..80, seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let r = SplitRatios { train: lo, val: hi - lo, test: 1.0 - hi };
            let m = manifest((0..n).map(|i| format!("id{i}")));
            let (t, v, e) = split_dataset(&m, r, seed).unwrap();
            prop_assert_eq!(t.len() + v.len() + e.len(), n);
            let mut all = ids(&t);
            all.extend(ids(&v));
            all.extend(ids(&e));
            prop_assert_eq!(all, ids(&m));
            if r.val == 0.0 { prop_assert!(v.is_empty()); }
        }
    }
}
