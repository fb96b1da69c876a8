use crate::common::ImageTensor;
use crate::{Error, Result};

/// A no-reference image quality model with scores in `[0, 1]`.
pub trait NoReferenceScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, image: &ImageTensor) -> Result<f64>;
}

/// Returns the same score for every image.
#[derive(Clone, Copy, Debug)]
pub struct ConstantScorer(pub f64);

impl NoReferenceScorer for ConstantScorer {
    fn name(&self) -> &str {
        "constant"
    }

    fn score(&self, _: &ImageTensor) -> Result<f64> {
        Ok(self.0)
    }
}

/// Mean score over `images`.
pub fn no_reference_quality(images: &[ImageTensor], scorer: Option<&dyn NoReferenceScorer>) -> Result<f64> {
    let scorer = scorer.ok_or(Error::ScorerUnavailable)?;
    if images.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sum = 0.0;
    for im in images {
        let s = scorer.score(im)?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange(s));
        }
        sum += s;
    }
    Ok(sum / images.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stub() {
        let ims = vec![ImageTensor::filled(3, 2, 2, 0.1).unwrap(); 5];
        assert_eq!(no_reference_quality(&ims, Some(&ConstantScorer(0.35))).unwrap(), 0.35);
        assert!(matches!(no_reference_quality(&[], Some(&ConstantScorer(0.35))), Err(Error::EmptyInput)));
        assert!(matches!(no_reference_quality(&ims, None), Err(Error::ScorerUnavailable)));
        assert!(matches!(no_reference_quality(&ims, Some(&ConstantScorer(1.5))), Err(Error::ScoreOutOfRange(_))));
    }
}
