//! Simulation and numerical verification for jump SDEs driven by
//! α-stable-type kernels.

pub mod domain;
pub mod ergodic;
pub mod error;
#[doc(hidden)]
pub mod fault;
pub mod feynman_kac;
pub mod fd_oracle;
pub mod grid;
pub mod kernel;
pub mod mc;
pub mod operator;
pub mod path;
pub mod point;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod sphere;
pub mod stats;
pub mod verify;

pub use domain::DomainSpec;
pub use error::{Error, Result};
pub use grid::{GridFunction1D, GridFunction2D};
pub use kernel::{ClassTag, KernelModel, ModelSpec, VariableOrderKernel};
pub use operator::{QuadratureScheme, SmoothProbe};
pub use point::Point;
pub use rng::{RngStream, StreamRange};
pub use sampler::StableSpec;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
