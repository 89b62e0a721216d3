//! The sparse network eigenmodel and the smooth model-based SVD.

pub mod network;
pub mod probit;
pub mod svd;
pub mod util;

pub use network::{
    eigenmodel_logpost, eigenmodel_predict, posterior_median_qlq, simulate_network,
    simulate_network_with_q, Dyad, EigenModel, NetworkData, NetworkTruth, Parameterization, QPrior,
};
pub use probit::{log_norm_cdf, norm_cdf};
pub use svd::{
    point_estimate_v, simulate_smooth_svd, svd_model_logpost, SvdHyper, SvdModel, SvdTruth,
    OMEGA_JITTER,
};
pub use util::{
    auc, center_columns, invgamma_from_mean_sd, principal_angle, sign_normalize,
    top_right_singular_vectors,
};
