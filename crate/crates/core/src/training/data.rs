use std::path::Path;

use candle_core::{DType, Device, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::common::{derive_seed, load_image, DatasetManifest, Domain, ImageTensor};
use crate::{Error, Result};

/// Stacks RGB (or gray, replicated) images of equal size into `N x 3 x H x W` f32.
pub fn stack_rgb(images: &[ImageTensor]) -> Result<Tensor> {
    if images.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (_, h, w) = images[0].dims();
    let mut data = Vec::with_capacity(images.len() * 3 * h * w);
    for im in images {
        if (im.height(), im.width()) != (h, w) {
            return Err(Error::ShapeMismatch(vec![3, h, w], vec![im.channels(), im.height(), im.width()]));
        }
        if im.channels() == 3 {
            data.extend_from_slice(im.data());
        } else {
            for _ in 0..3 {
                data.extend_from_slice(im.plane(0));
            }
        }
    }
    Ok(Tensor::from_vec(data, (images.len(), 3, h, w), &Device::Cpu)?)
}

/// Loads one side of every pair in `manifest`, resolving paths against `root`.
pub fn load_domain(manifest: &DatasetManifest, root: &Path, domain: Domain) -> Result<Tensor> {
    let images = manifest
        .samples()
        .iter()
        .map(|s| load_image(root.join(s.path(domain))).map_err(|e| e.for_sample(&s.id)))
        .collect::<Result<Vec<_>>>()?;
    stack_rgb(&images)
}

/// Aligned `(sources, targets)` for paired training.
#[derive(Clone, Debug)]
pub struct PairedData {
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl PairedData {
    pub fn new(inputs: Tensor, targets: Tensor) -> Result<Self> {
        if inputs.dims() != targets.dims() {
            return Err(Error::ShapeMismatch(inputs.dims().to_vec(), targets.dims().to_vec()));
        }
        Ok(Self { inputs: inputs.to_dtype(DType::F32)?, targets: targets.to_dtype(DType::F32)? })
    }

    pub fn load(manifest: &DatasetManifest, root: &Path) -> Result<Self> {
        Self::new(load_domain(manifest, root, Domain::A)?, load_domain(manifest, root, Domain::B)?)
    }

    pub fn len(&self) -> usize {
        self.inputs.dim(0).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Unaligned image collections for the two domains, with held-out validation images.
#[derive(Clone, Debug)]
pub struct UnpairedData {
    pub train_a: Tensor,
    pub train_b: Tensor,
    pub val_a: Tensor,
    pub val_b: Tensor,
}

/// Training order for `epoch`: a permutation of `0..n` that depends only on
/// `(seed, epoch, stream)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, epoch as u64), stream));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

pub fn gather(t: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let ids: Vec<u32> = idx.iter().map(|&i| i as u32).collect();
    let ids = Tensor::from_vec(ids, idx.len(), t.device())?;
    Ok(t.index_select(&ids, 0)?)
}
