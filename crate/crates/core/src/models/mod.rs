//! The enhancement heads: residual U-Net with CBAM, and the CycleGAN
//! generator/discriminator pair with optional ESA gating.

mod cbam;
mod cyclegan;
mod esa;
mod unet;

use candle_core::DType;

pub use cbam::{cbam_block, cbam_masks, register_cbam, CbamBlock};
pub use cyclegan::{
    discriminator_forward, generator_forward, init_discriminator, init_generator, CycleGanConfig,
    CycleGanParams,
};
pub use esa::{esa_block, esa_gate, register_esa, EsaBlock, ESA_MIN_SIZE};
pub use unet::{init_unet, unet_forward, unet_forward_probed, UNetCBAMConfig};

use crate::nn::ParamSet;
use crate::Result;

/// Any single network the toolkit can initialise.
#[derive(Clone, Debug, PartialEq)]
pub enum Architecture {
    Unet(UNetCBAMConfig),
    Generator(CycleGanConfig),
    Discriminator(CycleGanConfig),
}

impl Architecture {
    pub fn fingerprint(&self) -> String {
        match self {
            Architecture::Unet(c) => c.fingerprint(),
            Architecture::Generator(c) => c.generator_fingerprint(),
            Architecture::Discriminator(c) => c.discriminator_fingerprint(),
        }
    }
}

/// Deterministic per `(architecture, seed)`; weights are zero-mean normal with
/// standard deviation `gain / sqrt(fan_in)`, biases zero.
pub fn init_params(arch: &Architecture, seed: u64, dtype: DType) -> Result<ParamSet> {
    match arch {
        Architecture::Unet(c) => init_unet(c, seed, dtype),
        Architecture::Generator(c) => init_generator(c, seed, dtype),
        Architecture::Discriminator(c) => init_discriminator(c, seed, dtype),
    }
}
