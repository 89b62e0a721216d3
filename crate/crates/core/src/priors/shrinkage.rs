//! Entry law with kernel `|z|^{ℓ−1} exp(−ℓz²/2)`: unit variance, spiked at zero for ℓ < 1.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Sparsity parameter `ℓ ∈ (0, 1]`; `ℓ = 1` is the standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ShrinkageLaw {
    ell: f64,
}

impl TryFrom<f64> for ShrinkageLaw {
    type Error = crate::Error;
    fn try_from(ell: f64) -> Result<Self> {
        Self::new(ell)
    }
}

impl From<ShrinkageLaw> for f64 {
    fn from(law: ShrinkageLaw) -> f64 {
        law.ell
    }
}

impl ShrinkageLaw {
    pub fn new(ell: f64) -> Result<Self> {
        if !(ell > 0.0 && ell <= 1.0) {
            return Err(domain(format!(
                "shrinkage parameter ell must lie in (0, 1], got {ell}"
            )));
        }
        Ok(Self { ell })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Log normalizing constant `log[(ℓ/2)^{ℓ/2} / Γ(ℓ/2)]`.
    pub fn log_norm(&self) -> f64 {
        let h = 0.5 * self.ell;
        h * h.ln() - ln_gamma(h)
    }

    /// Unnormalized log kernel `(ℓ−1) ln|z| − ℓz²/2`.
    pub fn log_kernel(&self, z: f64) -> f64 {
        if self.ell == 1.0 {
            return -0.5 * z * z;
        }
        (self.ell - 1.0) * z.abs().ln() - 0.5 * self.ell * z * z
    }

    pub fn logpdf(&self, z: f64) -> Result<f64> {
        if self.ell == 1.0 {
            return Ok(-LN_SQRT_2PI - 0.5 * z * z);
        }
        if z == 0.0 {
            return Err(domain(
                "shrinkage density is unbounded at z = 0 for ell < 1",
            ));
        }
        Ok(self.log_norm() + self.log_kernel(z))
    }

    /// Draws `±√G` with `G ~ Gamma(ℓ/2, scale 2/ℓ)`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill(&mut out, rng);
        out
    }

    pub fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        let gamma = Gamma::new(0.5 * self.ell, 2.0 / self.ell).expect("validated shape");
        for v in out.iter_mut() {
            let g: f64 = gamma.sample(rng);
            let s = g.sqrt();
            *v = if rng.random::<bool>() { s } else { -s };
        }
    }

    /// Draws `(z, θ)` with `θ ~ Beta(ℓ/2, (1−ℓ)/2)` and `z | θ ~ N(0, θ/ℓ)`. Needs `ℓ < 1`.
    pub fn scale_mixture_sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<(f64, f64)>> {
        if self.ell >= 1.0 {
            return Err(domain("scale mixture representation needs ell in (0, 1)"));
        }
        let beta = Beta::new(0.5 * self.ell, 0.5 * (1.0 - self.ell))
            .map_err(|e| domain(format!("beta parameters: {e}")))?;
        Ok((0..n)
            .map(|_| {
                let theta: f64 = beta.sample(rng);
                let n: f64 = rng.sample(StandardNormal);
                ((theta / self.ell).sqrt() * n, theta)
            })
            .collect())
    }
}

/// Free-function form of [`ShrinkageLaw::logpdf`].
pub fn shrinkage_logpdf(z: f64, law: &ShrinkageLaw) -> Result<f64> {
    law.logpdf(z)
}

/// Free-function form of [`ShrinkageLaw::sample`].
pub fn shrinkage_sample<R: Rng + ?Sized>(n: usize, law: &ShrinkageLaw, rng: &mut R) -> Vec<f64> {
    law.sample(n, rng)
}

/// Free-function form of [`ShrinkageLaw::scale_mixture_sample`].
pub fn scale_mixture_sample<R: Rng + ?Sized>(
    n: usize,
    law: &ShrinkageLaw,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    law.scale_mixture_sample(n, rng)
}
