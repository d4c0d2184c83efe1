//! Generative models for SAR-to-optical translation: spatially-adaptive
//! normalization, two generator families, a multi-scale patch discriminator
//! and the training objectives, all on a small reverse-mode engine that is
//! generic over `f32` and `f64`.

pub mod config;
pub mod discriminator;
pub mod error;
pub mod generator;
pub mod graph;
mod kernels;
pub mod loss;
pub mod nn;
pub mod params;
pub mod scalar;
pub mod spade;
pub mod tensor;

pub use config::{
    total_generator_loss, DiscriminatorConfig, GeneratorConfig, LossConfig, NormStats, Variant,
};
pub use discriminator::Discriminator;
pub use error::{Error, Result};
pub use generator::Generator;
pub use graph::{GanKind, GanRole, Gradients, Graph, Var};
pub use params::{Param, ParamStore};
pub use scalar::Scalar;
pub use tensor::Tensor;
