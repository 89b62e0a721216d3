//! Hamiltonian Monte Carlo with a jittered fixed integration time, dual-averaging step size
//! adaptation and optional diagonal mass adaptation.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{diagnostics, Diagnostics};
use super::transforms::Constraint;
use crate::error::{domain, Error, Result};
use crate::rng::{stream_rng, StreamRng};

/// A named array of parameters sharing one constraint. Entries are stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBlock {
    pub name: String,
    pub shape: (usize, usize),
    pub constraint: Constraint,
}

impl ParameterBlock {
    pub fn new(
        name: impl Into<String>,
        shape: (usize, usize),
        constraint: Constraint,
    ) -> Result<Self> {
        constraint.validate()?;
        if shape.0 == 0 || shape.1 == 0 {
            return Err(domain("parameter block shapes must be positive"));
        }
        Ok(Self {
            name: name.into(),
            shape,
            constraint,
        })
    }

    pub fn scalar(name: impl Into<String>, constraint: Constraint) -> Self {
        Self::new(name, (1, 1), constraint).expect("valid scalar block")
    }

    pub fn len(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened names: `name`, `name[i]` or `name[i,j]` (1-based).
    pub fn names(&self) -> Vec<String> {
        match self.shape {
            (1, 1) => vec![self.name.clone()],
            (r, 1) => (1..=r).map(|i| format!("{}[{i}]", self.name)).collect(),
            (r, c) => (1..=c)
                .flat_map(|j| (1..=r).map(move |i| (i, j)))
                .map(|(i, j)| format!("{}[{i},{j}]", self.name))
                .collect(),
        }
    }
}

/// A log density on ℝⁿ (transform Jacobians included) with its gradient.
pub trait ModelPosterior: Sync {
    fn blocks(&self) -> &[ParameterBlock];

    /// Writes the gradient into `grad` and returns the log density.
    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64>;

    fn dim(&self) -> usize {
        self.blocks().iter().map(ParameterBlock::len).sum()
    }

    fn param_names(&self) -> Vec<String> {
        self.blocks()
            .iter()
            .flat_map(ParameterBlock::names)
            .collect()
    }

    /// Names of per-draw derived quantities (for example polar factors).
    fn derived_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn derived(&self, _theta: &[f64]) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    /// Starting point; defaults to i.i.d. `N(0, 0.1²)`.
    fn initial_point(&self, rng: &mut StreamRng) -> Vec<f64> {
        (0..self.dim())
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Constrained values for an unconstrained vector.
    fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(theta.len());
        let mut offset = 0;
        for b in self.blocks() {
            for &u in &theta[offset..offset + b.len()] {
                out.push(b.constraint.to_constrained(u));
            }
            offset += b.len();
        }
        out
    }

    fn log_density(&self, theta: &[f64]) -> Result<f64> {
        let mut g = vec![0.0; theta.len()];
        self.log_density_grad(theta, &mut g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MassMatrix {
    #[default]
    Unit,
    Diagonal,
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub seed: u64,
    pub init_stepsize: f64,
    pub mass: MassMatrix,
    /// Integration time; the number of steps is about `path_length / stepsize`.
    pub path_length: f64,
    /// Run the startup finiteness probes and gradient audit.
    pub audit: bool,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 1000,
            draws: 1000,
            target_accept: 0.8,
            max_leapfrog: 1024,
            seed: 0,
            init_stepsize: 0.1,
            mass: MassMatrix::Unit,
            path_length: 1.0,
            audit: true,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.chains == 0 || self.warmup == 0 || self.draws == 0 || self.max_leapfrog == 0 {
            problems.push("chains, warmup, draws and max_leapfrog must be >= 1");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            problems.push("target_accept must lie in (0, 1)");
        }
        if !(self.init_stepsize > 0.0 && self.init_stepsize.is_finite()) {
            problems.push("init_stepsize must be positive");
        }
        if !(self.path_length > 0.0 && self.path_length.is_finite()) {
            problems.push("path_length must be positive");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(domain(problems.join("; ")))
        }
    }
}

/// Draws and adaptation record of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// `draws × dim`, constrained scale.
    pub draws: Vec<Vec<f64>>,
    /// `draws × derived`, from [`ModelPosterior::derived`].
    pub derived: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    pub accept_rate: f64,
    pub stepsize: f64,
    pub stepsize_trace: Vec<f64>,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub leapfrog_steps: usize,
    pub inv_mass: Vec<f64>,
}

/// Output of [`hmc_sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub names: Vec<String>,
    pub derived_names: Vec<String>,
    pub chains: Vec<Chain>,
    /// Present when there are at least two chains of 100 draws.
    pub diagnostics: Option<Diagnostics>,
}

impl ChainOutput {
    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }

    /// All draws of parameter column `j`, chains concatenated.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.draws.iter().map(move |d| d[j]))
            .collect()
    }

    pub fn derived_column(&self, j: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.derived.iter().map(move |d| d[j]))
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn derived_index_of(&self, name: &str) -> Option<usize> {
        self.derived_names.iter().position(|n| n == name)
    }

    /// Iterates over `(parameter draw, derived draw)` pairs across chains.
    pub fn iter_draws(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.chains.iter().flat_map(|c| {
            c.draws
                .iter()
                .zip(&c.derived)
                .map(|(a, b)| (a.as_slice(), b.as_slice()))
        })
    }

    pub fn max_rhat(&self) -> Option<f64> {
        self.diagnostics.as_ref().map(|d| {
            d.split_rhat
                .iter()
                .copied()
                .filter(|r| !r.is_nan())
                .fold(0.0, f64::max)
        })
    }
}

/// End state of a leapfrog trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

/// Störmer–Verlet integration of `nsteps` steps for the Hamiltonian
/// `−log π(q) + ½ pᵀ M⁻¹ p`, starting from a state whose gradient is known.
pub fn leapfrog<F>(
    start: &LeapfrogState,
    stepsize: f64,
    nsteps: usize,
    inv_mass: &[f64],
    mut logp_grad: F,
) -> Result<LeapfrogState>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    if !(stepsize > 0.0) || nsteps == 0 {
        return Err(domain(
            "leapfrog needs a positive stepsize and at least one step",
        ));
    }
    let mut q = start.q.clone();
    let mut p = start.p.clone();
    let mut g = start.grad.clone();
    let mut lp = start.log_density;
    for _ in 0..nsteps {
        for i in 0..q.len() {
            p[i] += 0.5 * stepsize * g[i];
            q[i] += stepsize * inv_mass[i] * p[i];
        }
        lp = logp_grad(&q, &mut g)?;
        if !lp.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(domain("non-finite log density in trajectory"));
        }
        for i in 0..q.len() {
            p[i] += 0.5 * stepsize * g[i];
        }
    }
    Ok(LeapfrogState {
        q,
        p,
        log_density: lp,
        grad: g,
    })
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(a, m)| a * a * m).sum::<f64>()
}

const DIVERGENCE: f64 = 1000.0;

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    m: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            h_bar: 0.0,
            log_eps: eps.ln(),
            log_eps_bar: 0.0,
            m: 0.0,
            target,
        }
    }

    fn update(&mut self, accept: f64) {
        self.m += 1.0;
        let w = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        self.log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.m.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn final_stepsize(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

struct Transition {
    state: LeapfrogState,
    accept: f64,
    divergent: bool,
    steps: usize,
}

fn transition<M: ModelPosterior + ?Sized>(
    model: &M,
    current: &LeapfrogState,
    stepsize: f64,
    nsteps: usize,
    inv_mass: &[f64],
    rng: &mut StreamRng,
) -> Transition {
    let mut start = current.clone();
    for (p, m) in start.p.iter_mut().zip(inv_mass) {
        *p = rng.sample::<f64, _>(StandardNormal) / m.sqrt();
    }
    let h0 = -start.log_density + kinetic(&start.p, inv_mass);
    let end = leapfrog(&start, stepsize, nsteps, inv_mass, |q, g| {
        model.log_density_grad(q, g)
    });
    let u: f64 = rng.random();
    match end {
        Ok(end) => {
            let h1 = -end.log_density + kinetic(&end.p, inv_mass);
            let dh = h1 - h0;
            if !dh.is_finite() || dh.abs() > DIVERGENCE {
                return Transition {
                    state: current.clone(),
                    accept: 0.0,
                    divergent: true,
                    steps: nsteps,
                };
            }
            let accept = (-dh).exp().min(1.0);
            let state = if u < accept { end } else { current.clone() };
            Transition {
                state,
                accept,
                divergent: false,
                steps: nsteps,
            }
        }
        Err(_) => Transition {
            state: current.clone(),
            accept: 0.0,
            divergent: true,
            steps: nsteps,
        },
    }
}

/// Doubles or halves the step size until the one-step acceptance crosses 1/2.
fn reasonable_stepsize<M: ModelPosterior + ?Sized>(
    model: &M,
    state: &LeapfrogState,
    eps0: f64,
    inv_mass: &[f64],
    rng: &mut StreamRng,
) -> f64 {
    let mut eps = eps0;
    let mut probe = state.clone();
    for (p, m) in probe.p.iter_mut().zip(inv_mass) {
        *p = rng.sample::<f64, _>(StandardNormal) / m.sqrt();
    }
    let h0 = -probe.log_density + kinetic(&probe.p, inv_mass);
    let log_accept = |eps: f64| -> f64 {
        match leapfrog(&probe, eps, 1, inv_mass, |q, g| {
            model.log_density_grad(q, g)
        }) {
            Ok(end) => {
                let v = h0 - (-end.log_density + kinetic(&end.p, inv_mass));
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let half = 0.5f64.ln();
    let direction = if log_accept(eps) > half { 1.0 } else { -1.0 };
    for _ in 0..50 {
        let la = log_accept(eps);
        if direction * la <= direction * half {
            break;
        }
        eps *= 2f64.powf(direction);
    }
    if direction > 0.0 {
        eps
    } else {
        eps.max(1e-12)
    }
}

fn path_steps(config: &HmcConfig, eps: f64, rng: &mut StreamRng) -> usize {
    let l = (config.path_length / eps).round().max(1.0);
    let lo = (0.5 * l).ceil().max(1.0) as usize;
    let hi = (1.5 * l).floor().max(lo as f64) as usize;
    rng.random_range(lo..=hi).min(config.max_leapfrog)
}

fn initial_state<M: ModelPosterior + ?Sized>(
    model: &M,
    rng: &mut StreamRng,
) -> Result<LeapfrogState> {
    let dim = model.dim();
    for _ in 0..100 {
        let q = model.initial_point(rng);
        let mut grad = vec![0.0; dim];
        if let Ok(lp) = model.log_density_grad(&q, &mut grad) {
            if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
                return Ok(LeapfrogState {
                    q,
                    p: vec![0.0; dim],
                    log_density: lp,
                    grad,
                });
            }
        }
    }
    Err(Error::BadInitialization {
        finite: 0,
        probes: 100,
    })
}

/// Central-difference check of the model gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compares the analytic gradient with central differences (step `1e-5·max(1, |θ_i|)`).
pub fn gradient_audit<M: ModelPosterior + ?Sized>(
    model: &M,
    theta: &[f64],
    coordinates: &[usize],
    floor: f64,
) -> Result<Vec<AuditEntry>> {
    let mut grad = vec![0.0; theta.len()];
    model.log_density_grad(theta, &mut grad)?;
    coordinates
        .iter()
        .map(|&i| {
            let h = 1e-5 * theta[i].abs().max(1.0);
            let mut t = theta.to_vec();
            t[i] = theta[i] + h;
            let up = model.log_density(&t)?;
            t[i] = theta[i] - h;
            let down = model.log_density(&t)?;
            let numeric = (up - down) / (2.0 * h);
            Ok(AuditEntry {
                coordinate: i,
                analytic: grad[i],
                numeric,
                rel_error: relative_error(grad[i], numeric, floor),
            })
        })
        .collect()
}

const AUDIT_TOL: f64 = 1e-4;
const AUDIT_FLOOR: f64 = 1.0;
const PROBES: usize = 100;

fn startup_checks<M: ModelPosterior + ?Sized>(model: &M, config: &HmcConfig) -> Result<()> {
    let mut rng = stream_rng(config.seed, u64::MAX);
    let dim = model.dim();
    let finite = (0..PROBES)
        .filter(|_| {
            let q = model.initial_point(&mut rng);
            model.log_density(&q).map(f64::is_finite).unwrap_or(false)
        })
        .count();
    if finite * 100 < 99 * PROBES {
        return Err(Error::BadInitialization {
            finite,
            probes: PROBES,
        });
    }
    let start = initial_state(model, &mut rng)?;
    let coords: Vec<usize> = (0..10.min(dim)).map(|_| rng.random_range(0..dim)).collect();
    for e in gradient_audit(model, &start.q, &coords, AUDIT_FLOOR)? {
        if !(e.rel_error < AUDIT_TOL) {
            return Err(Error::GradientAuditFailed {
                coordinate: e.coordinate,
                analytic: e.analytic,
                numeric: e.numeric,
            });
        }
    }
    Ok(())
}

fn run_chain<M: ModelPosterior + ?Sized>(
    model: &M,
    config: &HmcConfig,
    index: usize,
) -> Result<Chain> {
    let mut rng = stream_rng(config.seed, index as u64);
    let dim = model.dim();
    let mut state = initial_state(model, &mut rng)?;
    let mut inv_mass = vec![1.0; dim];
    let mut eps = reasonable_stepsize(model, &state, config.init_stepsize, &inv_mass, &mut rng);
    let mut da = DualAveraging::new(eps, config.target_accept);

    let w = config.warmup;
    let adapt_mass = config.mass == MassMatrix::Diagonal && w >= 20;
    let (slow_start, slow_end) = (w / 2, (w as f64 * 0.85) as usize);
    let mut welford = Welford::new(dim);
    let mut stepsize_trace = Vec::with_capacity(w);
    let mut warmup_divergences = 0;

    for it in 0..w {
        let n = path_steps(config, eps, &mut rng);
        let t = transition(model, &state, eps, n, &inv_mass, &mut rng);
        state = t.state;
        warmup_divergences += t.divergent as usize;
        da.update(t.accept);
        eps = da.current();
        stepsize_trace.push(eps);
        if adapt_mass && it >= slow_start && it < slow_end {
            welford.push(&state.q);
            if it + 1 == slow_end {
                inv_mass = welford.regularized_variance();
                eps = reasonable_stepsize(model, &state, eps, &inv_mass, &mut rng);
                da = DualAveraging::new(eps, config.target_accept);
            }
        }
    }
    let eps = da.final_stepsize();

    let mut chain = Chain {
        draws: Vec::with_capacity(config.draws),
        derived: Vec::with_capacity(config.draws),
        log_density: Vec::with_capacity(config.draws),
        accept_rate: 0.0,
        stepsize: eps,
        stepsize_trace,
        divergences: 0,
        warmup_divergences,
        leapfrog_steps: 0,
        inv_mass: inv_mass.clone(),
    };
    let mut accept_sum = 0.0;
    for _ in 0..config.draws {
        let n = path_steps(config, eps, &mut rng);
        let t = transition(model, &state, eps, n, &inv_mass, &mut rng);
        state = t.state;
        accept_sum += t.accept;
        chain.divergences += t.divergent as usize;
        chain.leapfrog_steps += t.steps;
        chain.draws.push(model.constrain(&state.q));
        chain.derived.push(model.derived(&state.q)?);
        chain.log_density.push(state.log_density);
    }
    chain.accept_rate = accept_sum / config.draws as f64;
    Ok(chain)
}

struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Sample variance shrunk toward 1e-3, as in Stan's windowed adaptation.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|m2| {
                let var = m2 / (n - 1.0).max(1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Runs `config.chains` chains in parallel and computes diagnostics.
pub fn hmc_sample<M: ModelPosterior + ?Sized>(
    model: &M,
    config: &HmcConfig,
) -> Result<ChainOutput> {
    config.validate()?;
    if config.audit {
        startup_checks(model, config)?;
    }
    let chains = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(model, config, c))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = chains.iter().map(|c| c.draws.len()).sum();
    let divergent: usize = chains.iter().map(|c| c.divergences).sum();
    if 2 * divergent > total {
        return Err(Error::AllDivergent { divergent, total });
    }
    let draws: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| c.draws.clone()).collect();
    let accepts: Vec<f64> = chains.iter().map(|c| c.accept_rate).collect();
    let diagnostics = diagnostics(&draws, &accepts).ok();
    Ok(ChainOutput {
        names: model.param_names(),
        derived_names: model.derived_names(),
        chains,
        diagnostics,
    })
}
