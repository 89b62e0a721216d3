//! Probit network eigenmodel `π_ij = Φ(c + (QΛQᵀ)_ij)` with a sparsity prior on `Q`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{digamma, ln_gamma};

use super::probit::{d_log_norm_cdf, log_norm_cdf, norm_cdf};
use crate::error::{domain, Error, Result};
use crate::inference::transforms::{softplus, Constraint};
use crate::inference::{q_names, ChainOutput, ModelPosterior, ParameterBlock};
use crate::linalg::{pullback_with, Polar};
use crate::priors::EntryLaw;
use crate::rng::StreamRng;
use crate::stats::quantile_sorted;

/// Unordered node pair `i < j` with its observed edge indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dyad {
    pub i: usize,
    pub j: usize,
    pub y: bool,
}

/// Symmetric binary adjacency with missing entries. The diagonal is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkData {
    p: usize,
    dyads: Vec<Dyad>,
}

impl NetworkData {
    /// Reads `0`, `1` and `NaN` (missing) entries.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let p = m.nrows();
        if m.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "adjacency must be square, got {}x{}",
                p,
                m.ncols()
            )));
        }
        let cell = |i: usize, j: usize| -> Result<Option<bool>> {
            let v = m[(i, j)];
            if v.is_nan() {
                Ok(None)
            } else if v == 0.0 || v == 1.0 {
                Ok(Some(v == 1.0))
            } else {
                Err(Error::NonBinary {
                    row: i,
                    col: j,
                    value: v.to_string(),
                })
            }
        };
        let mut dyads = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                match (cell(i, j)?, cell(j, i)?) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::Asymmetric { row: i, col: j })
                    }
                    (Some(y), _) | (None, Some(y)) => dyads.push(Dyad { i, j, y }),
                    (None, None) => {}
                }
            }
        }
        Ok(Self { p, dyads })
    }

    pub fn from_dyads(p: usize, dyads: Vec<Dyad>) -> Result<Self> {
        if dyads.iter().any(|d| d.i >= d.j || d.j >= p) {
            return Err(domain("dyads must satisfy i < j < p"));
        }
        Ok(Self { p, dyads })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Observed dyads in row-major order of `(i, j)`.
    pub fn dyads(&self) -> &[Dyad] {
        &self.dyads
    }

    pub fn get(&self, i: usize, j: usize) -> Option<bool> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.dyads
            .iter()
            .find(|d| d.i == i && d.j == j)
            .map(|d| d.y)
    }

    /// Adjacency matrix with `NaN` for missing dyads and zeros on the diagonal.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_element(self.p, self.p, f64::NAN);
        m.fill_diagonal(0.0);
        for d in &self.dyads {
            let v = if d.y { 1.0 } else { 0.0 };
            m[(d.i, d.j)] = v;
            m[(d.j, d.i)] = v;
        }
        m
    }

    /// Holds out a random fraction of observed dyads; returns the training data and the held-out dyads.
    pub fn split<R: Rng + ?Sized>(
        &self,
        fraction: f64,
        rng: &mut R,
    ) -> Result<(NetworkData, Vec<Dyad>)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(domain(format!(
                "holdout fraction must lie in [0, 1), got {fraction}"
            )));
        }
        let mut idx: Vec<usize> = (0..self.dyads.len()).collect();
        idx.shuffle(rng);
        let n_out = (fraction * self.dyads.len() as f64).round() as usize;
        let mut held: Vec<usize> = idx[..n_out].to_vec();
        held.sort_unstable();
        let mut keep = vec![true; self.dyads.len()];
        held.iter().for_each(|&h| keep[h] = false);
        let train = self
            .dyads
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(d, _)| *d)
            .collect();
        Ok((
            NetworkData {
                p: self.p,
                dyads: train,
            },
            held.iter().map(|&h| self.dyads[h]).collect(),
        ))
    }

    /// `k`-fold partition of the observed dyads.
    pub fn folds<R: Rng + ?Sized>(
        &self,
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<(NetworkData, Vec<Dyad>)>> {
        if k < 2 || k > self.dyads.len() {
            return Err(domain(format!(
                "need 2 <= folds <= {}, got {k}",
                self.dyads.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.dyads.len()).collect();
        idx.shuffle(rng);
        Ok((0..k)
            .map(|f| {
                let mut train = Vec::new();
                let mut held = Vec::new();
                for (pos, &d) in idx.iter().enumerate() {
                    if pos % k == f {
                        held.push(self.dyads[d]);
                    } else {
                        train.push(self.dyads[d]);
                    }
                }
                train.sort_by_key(|d| (d.i, d.j));
                held.sort_by_key(|d| (d.i, d.j));
                (
                    NetworkData {
                        p: self.p,
                        dyads: train,
                    },
                    held,
                )
            })
            .collect())
    }
}

/// Prior on the eigenvector matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QPrior {
    /// Scale-mixture shrinkage entries with `ℓ ~ Uniform(0, 1)`.
    #[default]
    Sparse,
    /// Standard normal entries, so `Q` is uniform.
    Uniform,
}

/// How the sparse-prior expansion matrix is coordinatized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// Sample `z` directly.
    Centered,
    /// Sample `w ~ N(0, 1)` with `z = w √θ`; the factor `ℓ^{-1/2}` is dropped because `Q` is scale free.
    #[default]
    NonCentered,
}

const ELL_BOUNDS: Constraint = Constraint::Interval { a: 0.001, b: 0.999 };
const C_VAR: f64 = 100.0;

/// Posterior of the network eigenmodel, over `[c, λ, z or w, logit θ, logit ℓ]`.
#[derive(Debug, Clone)]
pub struct EigenModel {
    data: NetworkData,
    k: usize,
    prior: QPrior,
    param: Parameterization,
    blocks: Vec<ParameterBlock>,
}

impl EigenModel {
    pub fn new(
        data: NetworkData,
        k: usize,
        prior: QPrior,
        param: Parameterization,
    ) -> Result<Self> {
        let p = data.p();
        if k == 0 || k > p {
            return Err(Error::DimensionMismatch(format!(
                "need 1 <= k <= p, got k={k}, p={p}"
            )));
        }
        if data.dyads().is_empty() {
            return Err(Error::NoObservedDyads);
        }
        let mut blocks = vec![
            ParameterBlock::scalar("c", Constraint::None),
            ParameterBlock::new("lambda", (k, 1), Constraint::None)?,
        ];
        match (prior, param) {
            (QPrior::Uniform, _) | (QPrior::Sparse, Parameterization::Centered) => {
                blocks.push(ParameterBlock::new("z", (p, k), Constraint::None)?)
            }
            (QPrior::Sparse, Parameterization::NonCentered) => {
                blocks.push(ParameterBlock::new("w", (p, k), Constraint::None)?)
            }
        }
        if prior == QPrior::Sparse {
            blocks.push(ParameterBlock::new(
                "theta",
                (p, k),
                Constraint::Interval { a: 0.0, b: 1.0 },
            )?);
            blocks.push(ParameterBlock::scalar("ell", ELL_BOUNDS));
        }
        Ok(Self {
            data,
            k,
            prior,
            param,
            blocks,
        })
    }

    pub fn data(&self) -> &NetworkData {
        &self.data
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn prior(&self) -> QPrior {
        self.prior
    }

    fn pk(&self) -> usize {
        self.data.p() * self.k
    }

    /// Expansion matrix `Z` at `theta`.
    pub fn expansion(&self, theta: &[f64]) -> DMatrix<f64> {
        let (p, k, pk) = (self.data.p(), self.k, self.pk());
        let raw = &theta[1 + k..1 + k + pk];
        match (self.prior, self.param) {
            (QPrior::Sparse, Parameterization::NonCentered) => {
                let u = &theta[1 + k + pk..1 + k + 2 * pk];
                DMatrix::from_fn(p, k, |i, j| {
                    let idx = i + j * p;
                    raw[idx] * (-0.5 * softplus(-u[idx])).exp()
                })
            }
            _ => DMatrix::from_column_slice(p, k, raw),
        }
    }

    /// Probit log likelihood of the observed dyads and its gradients in `(c, λ, Q)`.
    fn log_likelihood(
        &self,
        c: f64,
        lambda: &[f64],
        q: &DMatrix<f64>,
    ) -> (f64, f64, Vec<f64>, DMatrix<f64>) {
        let (p, k) = (self.data.p(), self.k);
        let rows: Vec<f64> = (0..p)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| q[(i, j)])
            .collect();
        let mut gq_rows = vec![0.0; p * k];
        let mut g_lambda = vec![0.0; k];
        let (mut value, mut g_c) = (0.0, 0.0);
        for d in self.data.dyads() {
            let (qi, qj) = (&rows[d.i * k..(d.i + 1) * k], &rows[d.j * k..(d.j + 1) * k]);
            let eta = c + (0..k).map(|t| qi[t] * lambda[t] * qj[t]).sum::<f64>();
            let w = if d.y {
                value += log_norm_cdf(eta);
                d_log_norm_cdf(eta)
            } else {
                value += log_norm_cdf(-eta);
                -d_log_norm_cdf(-eta)
            };
            g_c += w;
            for t in 0..k {
                gq_rows[d.i * k + t] += w * lambda[t] * qj[t];
                gq_rows[d.j * k + t] += w * lambda[t] * qi[t];
                g_lambda[t] += w * qi[t] * qj[t];
            }
        }
        let gq = DMatrix::from_fn(p, k, |i, j| gq_rows[i * k + j]);
        (value, g_c, g_lambda, gq)
    }

    /// Edge probabilities `Φ(c + (QΛQᵀ)_ij)` for the given dyads at one parameter value.
    pub fn probabilities(
        c: f64,
        lambda: &[f64],
        q: &DMatrix<f64>,
        dyads: &[(usize, usize)],
    ) -> Vec<f64> {
        dyads
            .iter()
            .map(|&(i, j)| {
                norm_cdf(
                    c + (0..lambda.len())
                        .map(|t| q[(i, t)] * lambda[t] * q[(j, t)])
                        .sum::<f64>(),
                )
            })
            .collect()
    }
}

impl ModelPosterior for EigenModel {
    fn blocks(&self) -> &[ParameterBlock] {
        &self.blocks
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (p, k, pk) = (self.data.p(), self.k, self.pk());
        if theta.len() != self.dim() || grad.len() != self.dim() {
            return Err(Error::LengthMismatch {
                left: theta.len(),
                right: self.dim(),
            });
        }
        let c = theta[0];
        let lambda = &theta[1..1 + k];
        let z = self.expansion(theta);
        let polar = Polar::new(&z)?;
        let q = polar.q();
        let (mut value, g_c, g_lambda, gq) = self.log_likelihood(c, lambda, &q);
        let gz = pullback_with(&polar, &z, &gq)?;

        let ln2pi = (2.0 * PI).ln();
        value += -0.5 * c * c / C_VAR - 0.5 * (ln2pi + C_VAR.ln());
        grad[0] = g_c - c / C_VAR;
        let pf = p as f64;
        for t in 0..k {
            value += -0.5 * lambda[t] * lambda[t] / pf - 0.5 * (ln2pi + pf.ln());
            grad[1 + t] = g_lambda[t] - lambda[t] / pf;
        }

        let off = 1 + k;
        let raw = &theta[off..off + pk];
        if self.prior == QPrior::Uniform {
            for idx in 0..pk {
                value += -0.5 * raw[idx] * raw[idx] - 0.5 * ln2pi;
                grad[off + idx] = gz.as_slice()[idx] - raw[idx];
            }
            return finite(value, grad);
        }

        let u_theta = &theta[off + pk..off + 2 * pk];
        let (ell, dell, dlogjac) = ELL_BOUNDS.forward(theta[off + 2 * pk]);
        let (a, b) = (0.5 * ell, 0.5 * (1.0 - ell));
        let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(0.5);
        let mut g_ell = pk as f64 * (0.5 * digamma(b) - 0.5 * digamma(a));
        value -= pk as f64 * ln_beta;
        for idx in 0..pk {
            let u = u_theta[idx];
            let (ln_t, ln_1mt) = (-softplus(-u), -softplus(u));
            let th = ln_t.exp();
            let one_m = 1.0 - th;
            value += a * ln_t + b * ln_1mt;
            let mut g_u = a * one_m - b * th;
            g_ell += 0.5 * (ln_t - ln_1mt);
            let gz_i = gz.as_slice()[idx];
            match self.param {
                Parameterization::Centered => {
                    let zi = raw[idx];
                    let inv_t = 1.0 + (-u).exp();
                    let q2 = zi * zi * inv_t;
                    value += -0.5 * ln2pi - 0.5 * (ln_t - ell.ln()) - 0.5 * ell * q2;
                    grad[off + idx] = gz_i - zi * ell * inv_t;
                    g_u += one_m * (0.5 * ell * q2 - 0.5);
                    g_ell += 0.5 / ell - 0.5 * q2;
                }
                Parameterization::NonCentered => {
                    let wi = raw[idx];
                    let sqrt_t = (0.5 * ln_t).exp();
                    value += -0.5 * wi * wi - 0.5 * ln2pi;
                    grad[off + idx] = gz_i * sqrt_t - wi;
                    g_u += gz_i * 0.5 * wi * sqrt_t * one_m;
                }
            }
            grad[off + pk + idx] = g_u;
        }
        value += ELL_BOUNDS.log_jacobian(theta[off + 2 * pk]);
        grad[off + 2 * pk] = g_ell * dell + dlogjac;
        finite(value, grad)
    }

    /// Spectral start: `c` from the edge rate, `(Q, Λ)` from the top eigenpairs of the centered adjacency matrix.
    fn initial_point(&self, rng: &mut StreamRng) -> Vec<f64> {
        let mut theta: Vec<f64> = (0..self.dim())
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (p, k) = (self.data.p(), self.k);
        let dyads = self.data.dyads();
        let rate =
            (dyads.iter().filter(|d| d.y).count() as f64 / dyads.len() as f64).clamp(0.01, 0.99);
        let c0 = Normal::standard().inverse_cdf(rate);
        let observed = dyads.len() as f64 / (p * (p - 1) / 2).max(1) as f64;
        let scale = 1.0 / ((-0.5 * c0 * c0).exp() / (2.0 * PI).sqrt() * observed);
        let mut a = DMatrix::zeros(p, p);
        for d in dyads {
            let v = f64::from(u8::from(d.y)) - rate;
            a[(d.i, d.j)] = v;
            a[(d.j, d.i)] = v;
        }
        let eig = a.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&x, &y| {
            eig.eigenvalues[y]
                .abs()
                .total_cmp(&eig.eigenvalues[x].abs())
                .then(x.cmp(&y))
        });
        theta[0] += c0;
        let z_scale = match (self.prior, self.param) {
            (QPrior::Sparse, Parameterization::NonCentered) => (2.0 * p as f64).sqrt(),
            _ => (p as f64).sqrt(),
        };
        for (t, &o) in order.iter().take(k).enumerate() {
            theta[1 + t] += eig.eigenvalues[o] * scale;
            for i in 0..p {
                theta[1 + k + t * p + i] += z_scale * eig.eigenvectors[(i, o)];
            }
        }
        theta
    }

    fn derived_names(&self) -> Vec<String> {
        q_names("Q", self.data.p(), self.k)
    }

    fn derived(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(Polar::new(&self.expansion(theta))?.q().as_slice().to_vec())
    }
}

fn finite(value: f64, grad: &[f64]) -> Result<f64> {
    if value.is_finite() && grad.iter().all(|g| g.is_finite()) {
        Ok(value)
    } else {
        Err(domain("eigenmodel log density is not finite"))
    }
}

/// Unnormalized log posterior and gradient (free-function form of [`EigenModel`]).
pub fn eigenmodel_logpost(model: &EigenModel, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; theta.len()];
    let v = model.log_density_grad(theta, &mut g)?;
    Ok((v, g))
}

/// Per-draw `(c, λ, Q)` read from a chain by parameter name.
fn draw_parts(out: &ChainOutput) -> Result<(usize, Vec<usize>, usize, usize)> {
    let c = out
        .index_of("c")
        .ok_or_else(|| domain("chain has no parameter c"))?;
    let lambda: Vec<usize> = (1..)
        .map_while(|t| out.index_of(&format!("lambda[{t}]")))
        .collect();
    let k = lambda.len();
    let q0 = out
        .derived_index_of("Q[1,1]")
        .ok_or_else(|| domain("chain has no derived Q"))?;
    let p = (out.derived_names.len() - q0) / k.max(1);
    if k == 0 || out.derived_index_of(&format!("Q[{p},{k}]")).is_none() {
        return Err(domain("chain does not hold an eigenmodel"));
    }
    Ok((c, lambda, q0, p))
}

/// Posterior mean edge probability for each dyad.
pub fn eigenmodel_predict(out: &ChainOutput, dyads: &[(usize, usize)]) -> Result<Vec<f64>> {
    if out.total_draws() == 0 {
        return Err(Error::EmptyChain);
    }
    let (ci, li, q0, p) = draw_parts(out)?;
    if dyads.iter().any(|&(i, j)| i >= p || j >= p) {
        return Err(domain("dyad index out of range"));
    }
    let mut sum = vec![0.0; dyads.len()];
    for (draw, derived) in out.iter_draws() {
        let lambda: Vec<f64> = li.iter().map(|&i| draw[i]).collect();
        let q = DMatrix::from_column_slice(p, lambda.len(), &derived[q0..q0 + p * lambda.len()]);
        for (s, v) in sum
            .iter_mut()
            .zip(EigenModel::probabilities(draw[ci], &lambda, &q, dyads))
        {
            *s += v;
        }
    }
    let n = out.total_draws() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Element-wise posterior median of `QΛQᵀ`.
pub fn posterior_median_qlq(out: &ChainOutput) -> Result<DMatrix<f64>> {
    if out.total_draws() == 0 {
        return Err(Error::EmptyChain);
    }
    let (_, li, q0, p) = draw_parts(out)?;
    let k = li.len();
    let draws: Vec<(Vec<f64>, DMatrix<f64>)> = out
        .iter_draws()
        .map(|(d, der)| {
            let lambda = li.iter().map(|&i| d[i]).collect();
            (
                lambda,
                DMatrix::from_column_slice(p, k, &der[q0..q0 + p * k]),
            )
        })
        .collect();
    let mut med = DMatrix::zeros(p, p);
    let mut buf = vec![0.0; draws.len()];
    for i in 0..p {
        for j in i..p {
            for (b, (lambda, q)) in buf.iter_mut().zip(&draws) {
                *b = (0..k).map(|t| q[(i, t)] * lambda[t] * q[(j, t)]).sum();
            }
            buf.sort_by(f64::total_cmp);
            let m = quantile_sorted(&buf, 0.5);
            med[(i, j)] = m;
            med[(j, i)] = m;
        }
    }
    Ok(med)
}

/// Data-generating values of a simulated network.
#[derive(Debug, Clone)]
pub struct NetworkTruth {
    pub c: f64,
    pub lambda: Vec<f64>,
    pub q: DMatrix<f64>,
    pub ell: f64,
    /// Edge probabilities, zero on the diagonal.
    pub probabilities: DMatrix<f64>,
}

/// Simulates a complete network whose `Q` is drawn from the shrinkage prior with parameter `ell`.
pub fn simulate_network<R: Rng + ?Sized>(
    p: usize,
    c: f64,
    lambda: &[f64],
    ell: f64,
    rng: &mut R,
) -> Result<(NetworkData, NetworkTruth)> {
    let k = lambda.len();
    if k == 0 || k > p {
        return Err(Error::DimensionMismatch(format!(
            "need 1 <= k <= p, got k={k}, p={p}"
        )));
    }
    let z = EntryLaw::shrinkage(ell)?.sample_matrix(p, k, rng);
    let q = Polar::new(&z)?.q();
    simulate_network_with_q(c, lambda, q, ell, rng)
}

/// Simulates a complete network from a given semi-orthogonal `q`; `ell` is recorded as the regime label.
pub fn simulate_network_with_q<R: Rng + ?Sized>(
    c: f64,
    lambda: &[f64],
    q: DMatrix<f64>,
    ell: f64,
    rng: &mut R,
) -> Result<(NetworkData, NetworkTruth)> {
    let (p, k) = q.shape();
    if k != lambda.len() || k == 0 || k > p {
        return Err(Error::DimensionMismatch(format!(
            "q is {p}x{k} but {} eigenvalues given",
            lambda.len()
        )));
    }
    let mut probs = DMatrix::zeros(p, p);
    let mut dyads = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            let pr = EigenModel::probabilities(c, lambda, &q, &[(i, j)])[0];
            probs[(i, j)] = pr;
            probs[(j, i)] = pr;
            dyads.push(Dyad {
                i,
                j,
                y: rng.random::<f64>() < pr,
            });
        }
    }
    Ok((
        NetworkData { p, dyads },
        NetworkTruth {
            c,
            lambda: lambda.to_vec(),
            q,
            ell,
            probabilities: probs,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::gradient_audit;
    use crate::inference::{Chain, ChainOutput};
    use crate::rng::stream_rng;
    use rand_distr::StandardNormal;

    fn sim(p: usize, seed: u64) -> NetworkData {
        simulate_network(p, -0.5, &[6.0, -4.0], 0.4, &mut stream_rng(seed, 0))
            .unwrap()
            .0
    }

    fn random_theta(m: &EigenModel, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 1);
        (0..m.dim())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn adjacency_parsing() {
        let ok = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let d = NetworkData::from_matrix(&ok).unwrap();
        assert_eq!(
            d.dyads(),
            &[Dyad {
                i: 0,
                j: 1,
                y: true
            }]
        );
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            NetworkData::from_matrix(&asym),
            Err(Error::Asymmetric { .. })
        ));
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        assert!(matches!(
            NetworkData::from_matrix(&bad),
            Err(Error::NonBinary { .. })
        ));
        let na = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, f64::NAN, 1.0, f64::NAN, 0.0, 0.0, 1.0, 0.0, 0.0],
        );
        let d = NetworkData::from_matrix(&na).unwrap();
        assert_eq!(d.get(0, 1), None);
        assert_eq!(d.get(2, 0), Some(true));
        let back = d.to_matrix();
        assert!(back[(0, 1)].is_nan() && back[(1, 0)].is_nan());
        assert_eq!(back[(1, 2)], 0.0);
    }

    #[test]
    fn probit_at_zero() {
        let q = DMatrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let pr = EigenModel::probabilities(0.0, &[0.0, 0.0], &q, &[(0, 1), (2, 3)]);
        assert_eq!(pr, [0.5, 0.5]);
    }

    #[test]
    fn saturation() {
        let data = NetworkData::from_dyads(
            3,
            vec![Dyad {
                i: 0,
                j: 2,
                y: true,
            }],
        )
        .unwrap();
        let m = EigenModel::new(data, 1, QPrior::Uniform, Parameterization::Centered).unwrap();
        let q = DMatrix::from_column_slice(3, 1, &[0.6, 0.0, 0.8]);
        let (l1, ..) = m.log_likelihood(5.0, &[0.0], &q);
        let (l2, ..) = m.log_likelihood(10.0, &[0.0], &q);
        assert!(l1 < 0.0 && l2 < 0.0 && l2 > l1 && l2 > -1e-20);
    }

    #[test]
    fn gradients_match_differences() {
        let data = sim(8, 1);
        for (prior, param) in [
            (QPrior::Sparse, Parameterization::Centered),
            (QPrior::Sparse, Parameterization::NonCentered),
            (QPrior::Uniform, Parameterization::Centered),
        ] {
            let m = EigenModel::new(data.clone(), 2, prior, param).unwrap();
            let coords: Vec<usize> = (0..m.dim()).collect();
            for s in 0..5 {
                let theta = random_theta(&m, s);
                for e in gradient_audit(&m, &theta, &coords, 1e-6).unwrap() {
                    assert!(e.rel_error < 1e-5, "{prior:?} {param:?} {e:?}");
                }
            }
        }
    }

    #[test]
    fn sign_flip_invariance() {
        let m = EigenModel::new(sim(8, 2), 2, QPrior::Sparse, Parameterization::Centered).unwrap();
        let theta = random_theta(&m, 3);
        let mut flipped = theta.clone();
        for i in 0..8 {
            flipped[3 + 8 + i] = -flipped[3 + 8 + i];
        }
        let a = m.log_density(&theta).unwrap();
        let b = m.log_density(&flipped).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn missing_dyads_do_not_contribute() {
        let full = sim(8, 4);
        let (train, held) = full.split(0.3, &mut stream_rng(5, 0)).unwrap();
        assert!(!held.is_empty());
        // Re-encoding through a matrix with NaN at the held-out dyads gives the same model.
        let reparsed = NetworkData::from_matrix(&train.to_matrix()).unwrap();
        let a = EigenModel::new(train, 2, QPrior::Sparse, Parameterization::Centered).unwrap();
        let b = EigenModel::new(reparsed, 2, QPrior::Sparse, Parameterization::Centered).unwrap();
        let theta = random_theta(&a, 6);
        assert_eq!(
            a.log_density(&theta).unwrap(),
            b.log_density(&theta).unwrap()
        );
    }

    #[test]
    fn no_dyads() {
        let empty = NetworkData::from_dyads(4, vec![]).unwrap();
        assert!(matches!(
            EigenModel::new(empty, 2, QPrior::Sparse, Parameterization::Centered),
            Err(Error::NoObservedDyads)
        ));
    }

    fn fake_output(draws: Vec<(f64, [f64; 1], [f64; 2])>) -> ChainOutput {
        let chain = Chain {
            draws: draws.iter().map(|(c, l, _)| vec![*c, l[0]]).collect(),
            derived: draws.iter().map(|(_, _, q)| q.to_vec()).collect(),
            log_density: vec![0.0; draws.len()],
            accept_rate: 1.0,
            stepsize: 0.1,
            stepsize_trace: vec![],
            divergences: 0,
            warmup_divergences: 0,
            leapfrog_steps: 0,
            inv_mass: vec![],
        };
        ChainOutput {
            names: vec!["c".into(), "lambda[1]".into()],
            derived_names: q_names("Q", 2, 1),
            chains: vec![chain],
            diagnostics: None,
        }
    }

    #[test]
    fn predict_averages_draws() {
        let out = fake_output(vec![(0.0, [0.0], [0.6, 0.8])]);
        assert_eq!(eigenmodel_predict(&out, &[(0, 1)]).unwrap(), [0.5]);
        // Two draws whose probabilities are Φ(x₁) = 0.2 and Φ(x₂) = 0.6.
        let x1 = -0.8416212335729143;
        let x2 = 0.2533471031357997;
        let out = fake_output(vec![(x1, [0.0], [0.6, 0.8]), (x2, [0.0], [0.6, 0.8])]);
        let pr = eigenmodel_predict(&out, &[(0, 1)]).unwrap()[0];
        assert!((pr - 0.4).abs() < 1e-10, "{pr}");
        let med = posterior_median_qlq(&out).unwrap();
        assert_eq!(med, DMatrix::zeros(2, 2));
        let empty = ChainOutput {
            chains: vec![],
            ..out
        };
        assert!(matches!(
            eigenmodel_predict(&empty, &[(0, 1)]),
            Err(Error::EmptyChain)
        ));
    }

    #[test]
    fn folds_partition_dyads() {
        let data = sim(10, 7);
        let folds = data.folds(3, &mut stream_rng(8, 0)).unwrap();
        let total: usize = folds.iter().map(|(_, h)| h.len()).sum();
        assert_eq!(total, data.dyads().len());
        for (train, held) in &folds {
            assert_eq!(train.dyads().len() + held.len(), data.dyads().len());
        }
    }
}
