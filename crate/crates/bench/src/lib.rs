//! Shared fixtures for the benchmarks.

use nalgebra::DMatrix;
use stiefel_priors::linalg::gaussian_matrix;
use stiefel_priors::models::{
    center_columns, simulate_network, simulate_smooth_svd, EigenModel, Parameterization, QPrior,
    SvdHyper, SvdModel,
};
use stiefel_priors::rng::stream_rng;
use stiefel_priors::ModelPosterior;

pub fn gaussian(p: usize, k: usize, seed: u64) -> DMatrix<f64> {
    gaussian_matrix(p, k, &mut stream_rng(seed, 0))
}

/// Sparse-prior eigenmodel on a simulated p-node network, with its starting point.
pub fn eigenmodel(p: usize, k: usize) -> (EigenModel, Vec<f64>) {
    let lambda: Vec<f64> = (0..k).map(|i| 8.0 - 4.0 * i as f64).collect();
    let (data, _) = simulate_network(p, -0.5, &lambda, 0.5, &mut stream_rng(1, 0)).expect("simulation");
    let m = EigenModel::new(data, k, QPrior::Sparse, Parameterization::NonCentered).expect("model");
    let theta = m.initial_point(&mut stream_rng(1, 1));
    (m, theta)
}

/// Smooth SVD model on simulated n×p data, with its starting point.
pub fn svd_model(n: usize, p: usize, k: usize) -> (SvdModel, Vec<f64>) {
    let d: Vec<f64> = (0..k).map(|i| 100.0 / (i + 1) as f64).collect();
    let (y, _) = simulate_smooth_svd(n, &d, 1.0, 25.0, p, 2.0, &mut stream_rng(2, 0)).expect("simulation");
    let y = center_columns(&y);
    let hyper = SvdHyper::defaults_for(&y).expect("hyper");
    let m = SvdModel::new(y, k, hyper, 2.0, Parameterization::NonCentered).expect("model");
    let theta = m.initial_point(&mut stream_rng(2, 1));
    (m, theta)
}
