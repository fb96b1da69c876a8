//! Tensor building blocks shared by the models, losses and embedders.

mod gradcheck;
pub mod ops;
mod params;
mod pyramid;

pub use gradcheck::{gradcheck, GradCheckReport};
pub use params::{fingerprint, ParamBuilder, ParamSet};
pub use pyramid::RandomPyramid;
