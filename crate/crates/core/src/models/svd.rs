//! Model-based SVD `Y = UDVᵀ + σE` with a smooth MACG prior on `V`.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::network::Parameterization;
use super::util::{invgamma_from_mean_sd, top_right_singular_vectors};
use crate::error::{domain, Error, Result};
use crate::inference::{q_names, ChainOutput, Constraint, ModelPosterior, ParameterBlock};
use crate::linalg::{gaussian_matrix, toeplitz_cholesky_with_tangent, pullback_with, Polar, SemiOrthogonalMatrix};
use crate::priors::se_corr;
use crate::rng::StreamRng;

/// Diagonal jitter always added to `Ω(ρ)`.
pub const OMEGA_JITTER: f64 = 1e-8;

/// Hyperparameters: `1/σ² ~ Gamma(ν/2, νs²/2)`, `d_i ~ N⁺(0, τ²)`, `1/ρ ~ Gamma(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvdHyper {
    pub nu_err: f64,
    pub s2: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SvdHyper {
    /// `ν = 2`, `s² = var(Y)/4`, `τ = ‖Y‖_F`, and `ρ` with prior mean `200/(2π)` and sd 10.
    pub fn defaults_for(y: &DMatrix<f64>) -> Result<Self> {
        let n = y.len() as f64;
        let mean = y.mean();
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let (alpha, beta) = invgamma_from_mean_sd(200.0 / (2.0 * PI), 10.0)?;
        let h = Self {
            nu_err: 2.0,
            s2: 0.25 * var,
            tau: y.norm(),
            alpha,
            beta,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let bad: Vec<&str> = [
            ("nu_err", self.nu_err),
            ("s2", self.s2),
            ("tau", self.tau),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ]
        .iter()
        .filter(|(_, v)| !(*v > 0.0 && v.is_finite()))
        .map(|(n, _)| *n)
        .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(domain(format!(
                "hyperparameters must be positive: {}",
                bad.join(", ")
            )))
        }
    }
}

/// Cholesky factor of `Ω(ρ) + jitter·I` and the pieces its derivative needs.
#[derive(Debug)]
struct OmegaFactor {
    l: DMatrix<f64>,
    logdet: f64,
    tangent: RhoTangent,
}

#[derive(Debug)]
enum RhoTangent {
    Centered { inv: DMatrix<f64>, d_omega: DMatrix<f64> },
    /// `dL/dρ`.
    NonCentered(DMatrix<f64>),
}

const CACHE_SLOTS: usize = 8;

/// Posterior over `[x_u, x_v or w_v, log d, log σ², log ρ]`.
#[derive(Debug)]
pub struct SvdModel {
    y: DMatrix<f64>,
    k: usize,
    hyper: SvdHyper,
    spacing: f64,
    param: Parameterization,
    blocks: Vec<ParameterBlock>,
    cache: Mutex<VecDeque<(u64, Arc<OmegaFactor>)>>,
}

impl Clone for SvdModel {
    fn clone(&self) -> Self {
        Self {
            y: self.y.clone(),
            k: self.k,
            hyper: self.hyper,
            spacing: self.spacing,
            param: self.param,
            blocks: self.blocks.clone(),
            cache: Mutex::new(VecDeque::new()),
        }
    }
}

impl SvdModel {
    /// `spacing` is the distance between adjacent columns of `Y` in the kernel.
    pub fn new(
        y: DMatrix<f64>,
        k: usize,
        hyper: SvdHyper,
        spacing: f64,
        param: Parameterization,
    ) -> Result<Self> {
        let (n, p) = y.shape();
        if k == 0 || k > n.min(p) {
            return Err(Error::DimensionMismatch(format!(
                "need 1 <= k <= min(n, p), got k={k}, {n}x{p}"
            )));
        }
        hyper.validate()?;
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(domain(format!("spacing must be positive, got {spacing}")));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(domain("data contain non-finite values"));
        }
        let v_name = match param {
            Parameterization::Centered => "x_v",
            Parameterization::NonCentered => "w_v",
        };
        let blocks = vec![
            ParameterBlock::new("x_u", (n, k), Constraint::None)?,
            ParameterBlock::new(v_name, (p, k), Constraint::None)?,
            ParameterBlock::new("d", (k, 1), Constraint::Positive)?,
            ParameterBlock::scalar("sigma2", Constraint::Positive),
            ParameterBlock::scalar("rho", Constraint::Positive),
        ];
        Ok(Self {
            y,
            k,
            hyper,
            spacing,
            param,
            blocks,
            cache: Mutex::new(VecDeque::with_capacity(CACHE_SLOTS)),
        })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hyper(&self) -> &SvdHyper {
        &self.hyper
    }

    /// `Ω(ρ)` without jitter.
    pub fn omega(&self, rho: f64) -> DMatrix<f64> {
        let p = self.p();
        let lag: Vec<f64> = (0..p).map(|t| se_corr(self.spacing * t as f64, rho)).collect();
        DMatrix::from_fn(p, p, |i, j| lag[i.abs_diff(j)])
    }

    fn factor(&self, rho: f64) -> Result<Arc<OmegaFactor>> {
        let key = rho.to_bits();
        if let Some((_, f)) = self
            .cache
            .lock()
            .expect("cache lock")
            .iter()
            .find(|(k, _)| *k == key)
        {
            return Ok(f.clone());
        }
        let f = Arc::new(self.build_factor(rho)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() == CACHE_SLOTS {
            cache.pop_front();
        }
        cache.push_back((key, f.clone()));
        Ok(f)
    }

    fn build_factor(&self, rho: f64) -> Result<OmegaFactor> {
        let p = self.p();
        // Regular grid: entries depend only on the lag.
        let lag: Vec<(f64, f64)> = (0..p)
            .map(|t| {
                let d = self.spacing * t as f64;
                let c = se_corr(d, rho);
                (c, c * d * d / (rho * rho * rho))
            })
            .collect();
        let mut row: Vec<f64> = lag.iter().map(|x| x.0).collect();
        row[0] += OMEGA_JITTER;
        let d_row: Vec<f64> = lag.iter().map(|x| x.1).collect();
        let toeplitz = |v: &[f64]| DMatrix::from_fn(p, p, |i, j| v[i.abs_diff(j)]);
        let not_pd = || Error::NotPositiveDefinite {
            min_eigenvalue: toeplitz(&row).symmetric_eigenvalues().min(),
            threshold: 0.0,
        };
        let (l, tangent) = match self.param {
            Parameterization::Centered => {
                let chol = toeplitz(&row).cholesky().ok_or_else(not_pd)?;
                let inv = chol.inverse();
                (chol.l(), RhoTangent::Centered { inv, d_omega: toeplitz(&d_row) })
            }
            Parameterization::NonCentered => {
                let (l, dl) = toeplitz_cholesky_with_tangent(&row, &d_row).ok_or_else(not_pd)?;
                (l, RhoTangent::NonCentered(dl))
            }
        };
        let logdet = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(OmegaFactor { l, logdet, tangent })
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let (nk, pk) = (self.n() * self.k, self.p() * self.k);
        let d = nk + pk;
        (nk, d, d + self.k, d + self.k + 1)
    }

    /// `(U, V)` at `theta`.
    pub fn factors(&self, theta: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (n, p, k) = (self.n(), self.p(), self.k);
        let (v0, _, _, rho_i) = self.offsets();
        let xu = DMatrix::from_column_slice(n, k, &theta[..v0]);
        let xv = self.x_v(theta, theta[rho_i].exp())?;
        let _ = p;
        Ok((Polar::new(&xu)?.q(), Polar::new(&xv)?.q()))
    }

    fn x_v(&self, theta: &[f64], rho: f64) -> Result<DMatrix<f64>> {
        let (p, k) = (self.p(), self.k);
        let (v0, d0, _, _) = self.offsets();
        let raw = DMatrix::from_column_slice(p, k, &theta[v0..d0]);
        Ok(match self.param {
            Parameterization::Centered => raw,
            Parameterization::NonCentered => &self.factor(rho)?.l * raw,
        })
    }
}

impl ModelPosterior for SvdModel {
    fn blocks(&self) -> &[ParameterBlock] {
        &self.blocks
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (n, p, k) = (self.n(), self.p(), self.k);
        if theta.len() != self.dim() || grad.len() != self.dim() {
            return Err(Error::LengthMismatch {
                left: theta.len(),
                right: self.dim(),
            });
        }
        let (v0, d0, s_i, rho_i) = self.offsets();
        let ln2pi = (2.0 * PI).ln();
        let h = &self.hyper;
        let d: Vec<f64> = theta[d0..d0 + k].iter().map(|u| u.exp()).collect();
        let sigma2 = theta[s_i].exp();
        let rho = theta[rho_i].exp();
        let factor = self.factor(rho)?;

        let xu = DMatrix::from_column_slice(n, k, &theta[..v0]);
        let raw_v = DMatrix::from_column_slice(p, k, &theta[v0..d0]);
        let xv = match self.param {
            Parameterization::Centered => raw_v.clone(),
            Parameterization::NonCentered => &factor.l * &raw_v,
        };
        let (pu, pv) = (Polar::new(&xu)?, Polar::new(&xv)?);
        let (u, v) = (pu.q(), pv.q());

        // Gaussian likelihood.
        let mut ud = u.clone();
        for (j, dj) in d.iter().enumerate() {
            ud.column_mut(j).scale_mut(*dj);
        }
        let r = &self.y - &ud * v.transpose();
        let rss = r.norm_squared();
        let np = (n * p) as f64;
        let mut value = -0.5 * rss / sigma2 - 0.5 * np * (ln2pi + sigma2.ln());
        let rv = &r * &v;
        let mut g_u = rv.clone();
        for (j, dj) in d.iter().enumerate() {
            g_u.column_mut(j).scale_mut(dj / sigma2);
        }
        let g_v = r.transpose() * &ud / sigma2;
        let utrv = u.transpose() * &rv;

        // U: standard matrix normal expansion.
        let gxu = pullback_with(&pu, &xu, &g_u)? - &xu;
        value += -0.5 * xu.norm_squared() - 0.5 * (n * k) as f64 * ln2pi;
        grad[..v0].copy_from_slice(gxu.as_slice());

        // V: matrix normal(0, Ω(ρ), I) expansion.
        let gxv_lik = pullback_with(&pv, &xv, &g_v)?;
        let g_rho_v;
        match &factor.tangent {
            RhoTangent::Centered { inv, d_omega } => {
                let a = inv * &xv;
                value += -0.5 * xv.dot(&a)
                    - 0.5 * k as f64 * factor.logdet
                    - 0.5 * (p * k) as f64 * ln2pi;
                let gx = gxv_lik - &a;
                grad[v0..d0].copy_from_slice(gx.as_slice());
                let aat = &a * a.transpose();
                g_rho_v = 0.5 * (aat - inv * k as f64).dot(d_omega);
            }
            RhoTangent::NonCentered(dl) => {
                value += -0.5 * raw_v.norm_squared() - 0.5 * (p * k) as f64 * ln2pi;
                let ltg = factor.l.transpose() * &gxv_lik;
                g_rho_v = gxv_lik.dot(&(dl * &raw_v));
                grad[v0..d0].copy_from_slice((ltg - &raw_v).as_slice());
            }
        }

        // d: truncated normal, log scale.
        let tau2 = h.tau * h.tau;
        for j in 0..k {
            let g_d = utrv[(j, j)] / sigma2 - d[j] / tau2;
            value += -0.5 * d[j] * d[j] / tau2 + std::f64::consts::LN_2 - 0.5 * (ln2pi + tau2.ln())
                + theta[d0 + j];
            grad[d0 + j] = g_d * d[j] + 1.0;
        }

        // σ²: inverse gamma(ν/2, νs²/2), log scale.
        let (a_s, b_s) = (0.5 * h.nu_err, 0.5 * h.nu_err * h.s2);
        value += a_s * b_s.ln() - ln_gamma(a_s) - a_s * theta[s_i] - b_s / sigma2;
        grad[s_i] = 0.5 * rss / sigma2 - 0.5 * np - a_s + b_s / sigma2;

        // ρ: inverse gamma(α, β), log scale.
        value += h.alpha * h.beta.ln() - ln_gamma(h.alpha) - h.alpha * theta[rho_i] - h.beta / rho;
        grad[rho_i] = g_rho_v * rho - h.alpha + h.beta / rho;

        if value.is_finite() && grad.iter().all(|g| g.is_finite()) {
            Ok(value)
        } else {
            Err(domain("svd model log density is not finite"))
        }
    }

    fn derived_names(&self) -> Vec<String> {
        let mut names = q_names("U", self.n(), self.k);
        names.extend(q_names("V", self.p(), self.k));
        names
    }

    fn derived(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let (u, v) = self.factors(theta)?;
        Ok(u.iter().chain(v.iter()).copied().collect())
    }

    /// Expansion matrices `N(0, 0.1²)`; positive scalars start near data-scale values.
    fn initial_point(&self, rng: &mut StreamRng) -> Vec<f64> {
        let mut theta: Vec<f64> = (0..self.dim())
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (_, d0, s_i, rho_i) = self.offsets();
        let h = &self.hyper;
        let d_scale = (self.y.norm() / (self.k as f64).sqrt())
            .max(f64::MIN_POSITIVE)
            .ln();
        for j in 0..self.k {
            theta[d0 + j] += d_scale;
        }
        theta[s_i] += h.s2.ln();
        theta[rho_i] += (h.beta / (h.alpha - 1.0)).ln();
        theta
    }
}

/// Unnormalized log posterior and gradient (free-function form of [`SvdModel`]).
pub fn svd_model_logpost(model: &SvdModel, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; theta.len()];
    let v = model.log_density_grad(theta, &mut g)?;
    Ok((v, g))
}

/// First `k` right singular vectors of the posterior mean of `UDVᵀ`.
pub fn point_estimate_v(out: &ChainOutput, k: usize) -> Result<SemiOrthogonalMatrix> {
    if out.total_draws() == 0 {
        return Err(Error::EmptyChain);
    }
    let kk = (1..)
        .map_while(|j| out.index_of(&format!("d[{j}]")))
        .count();
    let d_idx: Vec<usize> = (1..=kk)
        .map(|j| out.index_of(&format!("d[{j}]")).unwrap())
        .collect();
    let u0 = out
        .derived_index_of("U[1,1]")
        .ok_or_else(|| domain("chain has no derived U"))?;
    let v0 = out
        .derived_index_of("V[1,1]")
        .ok_or_else(|| domain("chain has no derived V"))?;
    if kk == 0 {
        return Err(domain("chain has no singular values d"));
    }
    let n = (v0 - u0) / kk;
    let p = (out.derived_names.len() - v0) / kk;
    let mut mean = DMatrix::zeros(n, p);
    for (draw, der) in out.iter_draws() {
        let mut ud = DMatrix::from_column_slice(n, kk, &der[u0..u0 + n * kk]);
        for (j, &i) in d_idx.iter().enumerate() {
            ud.column_mut(j).scale_mut(draw[i]);
        }
        let v = DMatrix::from_column_slice(p, kk, &der[v0..v0 + p * kk]);
        mean += ud * v.transpose();
    }
    mean /= out.total_draws() as f64;
    top_right_singular_vectors(&mean, k)
}

/// Data-generating values of a simulated smooth SVD data set.
#[derive(Debug, Clone)]
pub struct SvdTruth {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub d: Vec<f64>,
    pub sigma: f64,
    pub rho: f64,
}

/// `Y = UDVᵀ + σE` with Haar `U` and `V` the polar factor of SE-kernel Gaussian process curves.
pub fn simulate_smooth_svd<R: Rng + ?Sized>(
    n: usize,
    d: &[f64],
    sigma: f64,
    rho: f64,
    p: usize,
    spacing: f64,
    rng: &mut R,
) -> Result<(DMatrix<f64>, SvdTruth)> {
    let k = d.len();
    if k == 0 || k > n.min(p) {
        return Err(Error::DimensionMismatch(format!(
            "need 1 <= k <= min(n, p), got k={k}"
        )));
    }
    let omega = crate::priors::CorrelationMatrix::new(
        crate::priors::CorrelationFamily::SquaredExponential { rho },
        p,
        spacing,
    )?;
    let curves = omega.sqrt()? * gaussian_matrix(p, k, rng);
    let v = Polar::new(&curves)?.q();
    let u = Polar::new(&gaussian_matrix(n, k, rng))?.q();
    let mut ud = u.clone();
    for (j, dj) in d.iter().enumerate() {
        ud.column_mut(j).scale_mut(*dj);
    }
    let y = ud * v.transpose() + gaussian_matrix(n, p, rng) * sigma;
    Ok((
        y,
        SvdTruth {
            u,
            v,
            d: d.to_vec(),
            sigma,
            rho,
        },
    ))
}
