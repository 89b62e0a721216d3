//! Polar expansion: sample an unconstrained `X` and report `Q_X = X(XᵀX)^{-1/2}`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::hmc::{ModelPosterior, ParameterBlock};
use super::transforms::Constraint;
use crate::error::{Error, Result};
use crate::linalg::{pullback_with, Polar};
use crate::priors::CorrelationMatrix;

/// Log density, its gradient in `X`, and the polar factor at `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFragment {
    pub value: f64,
    pub grad_x: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

/// Combines a likelihood in `Q` with a prior density on `X`.
///
/// `likelihood(Q)` returns `(log p(y | Q), ∇_Q)`, `prior(X)` returns `(log p(X), ∇_X)`.
pub fn polar_expand<L, P>(x: &DMatrix<f64>, likelihood: L, prior: P) -> Result<PolarFragment>
where
    L: FnOnce(&DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>,
    P: FnOnce(&DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>,
{
    let polar = Polar::new(x)?;
    let q = polar.q();
    let (like, grad_q) = likelihood(&q)?;
    let (prior, grad_prior) = prior(x)?;
    let grad_x = pullback_with(&polar, x, &grad_q)? + grad_prior;
    Ok(PolarFragment {
        value: like + prior,
        grad_x,
        q,
    })
}

/// `N_{p,k}(0, Ω, I)` density for the expansion matrix.
#[derive(Debug, Clone)]
pub struct MatrixNormalPrior {
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
    p: usize,
}

impl MatrixNormalPrior {
    pub fn new(omega: &DMatrix<f64>) -> Result<Self> {
        let p = omega.nrows();
        let chol = omega
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite {
                min_eigenvalue: omega.clone().symmetric_eigenvalues().min(),
                threshold: 0.0,
            })?;
        let logdet = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        Ok(Self { chol, logdet, p })
    }

    pub fn identity(p: usize) -> Self {
        Self::new(&DMatrix::identity(p, p)).expect("identity is SPD")
    }

    pub fn from_correlation(omega: &CorrelationMatrix) -> Result<Self> {
        Self::new(omega.entries())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// `Ω⁻¹ X`.
    pub fn solve(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(x)
    }

    /// `(log density, −Ω⁻¹X)`.
    pub fn log_density_grad(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        if x.nrows() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "expansion matrix has {} rows, prior expects {}",
                x.nrows(),
                self.p
            )));
        }
        let k = x.ncols() as f64;
        let w = self.solve(x);
        let quad = x.dot(&w);
        let value = -0.5 * quad - 0.5 * k * self.logdet - 0.5 * self.p as f64 * k * (2.0 * PI).ln();
        Ok((value, -w))
    }
}

/// `Q[i,j]` names, column-major.
pub fn q_names(prefix: &str, p: usize, k: usize) -> Vec<String> {
    (1..=k)
        .flat_map(|j| (1..=p).map(move |i| format!("{prefix}[{i},{j}]")))
        .collect()
}

/// Flat likelihood with a matrix-normal expansion prior; the pushforward of `X` is `MACG(Ω)`.
#[derive(Debug, Clone)]
pub struct PolarPriorPosterior {
    prior: MatrixNormalPrior,
    k: usize,
    blocks: Vec<ParameterBlock>,
}

impl PolarPriorPosterior {
    pub fn new(omega: &DMatrix<f64>, k: usize) -> Result<Self> {
        let prior = MatrixNormalPrior::new(omega)?;
        let p = prior.p();
        if k == 0 || k > p {
            return Err(Error::DimensionMismatch(format!(
                "need 1 <= k <= p, got k={k}, p={p}"
            )));
        }
        Ok(Self {
            prior,
            k,
            blocks: vec![ParameterBlock::new("X", (p, k), Constraint::None)?],
        })
    }
}

impl ModelPosterior for PolarPriorPosterior {
    fn blocks(&self) -> &[ParameterBlock] {
        &self.blocks
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let x = DMatrix::from_column_slice(self.prior.p(), self.k, theta);
        let f = polar_expand(
            &x,
            |q| Ok((0.0, DMatrix::zeros(q.nrows(), q.ncols()))),
            |x| self.prior.log_density_grad(x),
        )?;
        grad.copy_from_slice(f.grad_x.as_slice());
        Ok(f.value)
    }

    fn derived_names(&self) -> Vec<String> {
        q_names("Q", self.prior.p(), self.k)
    }

    fn derived(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let x = DMatrix::from_column_slice(self.prior.p(), self.k, theta);
        Ok(Polar::new(&x)?.q().as_slice().to_vec())
    }
}
