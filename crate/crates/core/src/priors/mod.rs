//! Entry laws, correlation families, structured priors on the Stiefel manifold, and the MACG density.

pub mod bessel;
pub mod correlation;
pub mod macg;
pub mod shrinkage;
pub mod spec;

pub use bessel::{bessel_k, ln_bessel_k};
pub use correlation::{
    correlation_matrix, matern_corr, se_corr, CorrelationFamily, CorrelationMatrix,
};
pub use macg::macg_logpdf;
pub use shrinkage::{scale_mixture_sample, shrinkage_logpdf, shrinkage_sample, ShrinkageLaw};
pub use spec::{sample_matrix_x, sample_prior_q, EntryLaw, StructuredPriorSpec};
