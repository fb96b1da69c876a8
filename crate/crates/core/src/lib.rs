//! Restoring detail lost by distilled text-to-image generators.
//!
//! The crate covers the full desk-scale pipeline: paired synthetic dataset
//! construction, the three image-to-image enhancement heads, their training
//! objectives and loops, and the evaluation protocol (SSIM/PSNR, FID and
//! FID_diff, latency benchmarking).

pub mod common;
pub mod datagen;
pub mod diversity;
pub mod evaluation;
pub mod losses;
pub mod models;
pub mod nn;
pub mod training;

mod error;

pub use common::{ImageTensor, RunConfig};
pub use error::{Error, Result};
