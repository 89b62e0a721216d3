//! Hamiltonian Monte Carlo over unconstrained coordinates, with polar expansion for
//! semi-orthogonal parameters.

pub mod diagnostics;
pub mod hmc;
pub mod polar;
pub mod transforms;

pub use diagnostics::{diagnostics, ess, split_rhat, Diagnostics};
pub use hmc::{
    gradient_audit, hmc_sample, leapfrog, relative_error, AuditEntry, Chain, ChainOutput,
    HmcConfig, LeapfrogState, MassMatrix, ModelPosterior, ParameterBlock,
};
pub use polar::{polar_expand, q_names, MatrixNormalPrior, PolarFragment, PolarPriorPosterior};
pub use transforms::{expit, softplus, to_constrained, to_unconstrained, Constraint};
