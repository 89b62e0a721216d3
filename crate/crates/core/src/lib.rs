//! Structured priors on the Stiefel manifold, theory checks, and polar-expansion HMC.

pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub use linalg::{
    frechet_inv_sqrt, inv_sqrt_spd, polar_project, polar_pullback_grad, sqrt_spd, PolarFactors,
    SemiOrthogonalMatrix, SpdMatrix,
};
pub mod priors;
pub mod stats;

pub use priors::{
    CorrelationFamily, CorrelationMatrix, EntryLaw, ShrinkageLaw, StructuredPriorSpec,
};
pub mod inference;
pub mod io;
pub mod models;
pub mod rng;
pub mod theory;

pub use inference::{hmc_sample, ChainOutput, HmcConfig, ModelPosterior, ParameterBlock};

/// Crate version, recorded in run logs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
