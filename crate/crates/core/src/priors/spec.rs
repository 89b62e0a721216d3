//! The law of `X = Ω^{1/2} Z` and of its polar factor `Q_X`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::correlation::CorrelationMatrix;
use super::shrinkage::ShrinkageLaw;
use crate::error::{domain, Error, Result};
use crate::linalg::{gaussian_matrix, polar_q, SemiOrthogonalMatrix};

/// Distribution of the i.i.d. entries of `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntryLaw {
    StandardNormal,
    Shrinkage { ell: ShrinkageLaw },
}

impl EntryLaw {
    pub fn shrinkage(ell: f64) -> Result<Self> {
        Ok(EntryLaw::Shrinkage {
            ell: ShrinkageLaw::new(ell)?,
        })
    }

    /// p×k matrix of i.i.d. entries, filled column by column.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, p: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
        match self {
            EntryLaw::StandardNormal => gaussian_matrix(p, k, rng),
            EntryLaw::Shrinkage { ell } => {
                let mut z = DMatrix::zeros(p, k);
                ell.fill(z.as_mut_slice(), rng);
                z
            }
        }
    }
}

/// Dimensions, entry law and row correlation of a structured prior.
#[derive(Debug, Clone)]
pub struct StructuredPriorSpec {
    p: usize,
    k: usize,
    entry_law: EntryLaw,
    omega: Arc<CorrelationMatrix>,
}

impl StructuredPriorSpec {
    /// Shrinkage entries are only allowed with `Ω = I`.
    pub fn new(
        p: usize,
        k: usize,
        entry_law: EntryLaw,
        omega: Arc<CorrelationMatrix>,
    ) -> Result<Self> {
        if matches!(entry_law, EntryLaw::Shrinkage { .. }) && !omega.is_identity() {
            return Err(domain(
                "shrinkage entries require an identity correlation matrix",
            ));
        }
        Self::new_unrestricted(p, k, entry_law, omega)
    }

    /// As [`StructuredPriorSpec::new`] but allows any entry law with any `Ω`.
    pub fn new_unrestricted(
        p: usize,
        k: usize,
        entry_law: EntryLaw,
        omega: Arc<CorrelationMatrix>,
    ) -> Result<Self> {
        if k == 0 || p < k {
            return Err(Error::DimensionMismatch(format!(
                "need p >= k >= 1, got p={p}, k={k}"
            )));
        }
        if omega.p() != p {
            return Err(Error::DimensionMismatch(format!(
                "correlation matrix is {}x{}, expected {p}x{p}",
                omega.p(),
                omega.p()
            )));
        }
        Ok(Self {
            p,
            k,
            entry_law,
            omega,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entry_law(&self) -> &EntryLaw {
        &self.entry_law
    }

    pub fn omega(&self) -> &CorrelationMatrix {
        &self.omega
    }

    /// One draw of `X = Ω^{1/2} Z`.
    pub fn sample_x<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DMatrix<f64>> {
        let z = self.entry_law.sample_matrix(self.p, self.k, rng);
        if self.omega.is_identity() {
            Ok(z)
        } else {
            Ok(self.omega.sqrt()? * z)
        }
    }

    /// One draw of `Q_X`.
    pub fn sample_q<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SemiOrthogonalMatrix> {
        let x = self.sample_x(rng)?;
        Ok(SemiOrthogonalMatrix::new_unchecked(polar_q(&x)?))
    }
}

/// Free-function form of [`StructuredPriorSpec::sample_x`].
pub fn sample_matrix_x<R: Rng + ?Sized>(
    spec: &StructuredPriorSpec,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    spec.sample_x(rng)
}

/// Free-function form of [`StructuredPriorSpec::sample_q`].
pub fn sample_prior_q<R: Rng + ?Sized>(
    spec: &StructuredPriorSpec,
    rng: &mut R,
) -> Result<SemiOrthogonalMatrix> {
    spec.sample_q(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthogonality_defect;
    use crate::priors::correlation::CorrelationFamily;
    use crate::stats::ks_against;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::function::beta::beta_reg;

    fn identity_spec(p: usize, k: usize, law: EntryLaw) -> StructuredPriorSpec {
        StructuredPriorSpec::new(p, k, law, Arc::new(CorrelationMatrix::identity(p))).unwrap()
    }

    #[test]
    fn shrinkage_needs_identity() {
        let omega = Arc::new(
            CorrelationMatrix::new(CorrelationFamily::Power { rho: 0.5 }, 5, 1.0).unwrap(),
        );
        let law = EntryLaw::shrinkage(0.3).unwrap();
        assert!(StructuredPriorSpec::new(5, 2, law, omega.clone()).is_err());
        assert!(StructuredPriorSpec::new_unrestricted(5, 2, law, omega.clone()).is_ok());
        assert!(StructuredPriorSpec::new(5, 6, EntryLaw::StandardNormal, omega.clone()).is_err());
        assert!(StructuredPriorSpec::new(4, 2, EntryLaw::StandardNormal, omega).is_err());
    }

    #[test]
    fn identity_column_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = identity_spec(1000, 2, EntryLaw::StandardNormal);
        let x = spec.sample_x(&mut rng).unwrap();
        let cov = x.transpose() * &x / 1000.0;
        // Entry SEs are about 1/√1000 off the diagonal and √2/√1000 on it.
        assert!((cov[(0, 0)] - 1.0).abs() < 3.0 * (2.0f64 / 1000.0).sqrt());
        assert!((cov[(1, 1)] - 1.0).abs() < 3.0 * (2.0f64 / 1000.0).sqrt());
        assert!(cov[(0, 1)].abs() < 3.0 / 1000f64.sqrt());
    }

    #[test]
    fn power_correlation_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let omega = Arc::new(
            CorrelationMatrix::new(CorrelationFamily::Power { rho: 0.5 }, 4, 1.0).unwrap(),
        );
        let spec = StructuredPriorSpec::new(4, 2, EntryLaw::StandardNormal, omega).unwrap();
        let (mut s12, mut s11, mut s22) = (0.0, 0.0, 0.0);
        for _ in 0..50_000 {
            let x = spec.sample_x(&mut rng).unwrap();
            for j in 0..2 {
                s12 += x[(0, j)] * x[(1, j)];
                s11 += x[(0, j)] * x[(0, j)];
                s22 += x[(1, j)] * x[(1, j)];
            }
        }
        let corr = s12 / (s11 * s22).sqrt();
        assert!((corr - 0.5).abs() < 0.01, "{corr}");
    }

    #[test]
    fn shrinkage_entry_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let spec = identity_spec(1000, 100, EntryLaw::shrinkage(0.1).unwrap());
        let x = spec.sample_x(&mut rng).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn uniform_squared_entries_average_one_over_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let spec = identity_spec(100, 1, EntryLaw::StandardNormal);
        let n = 20_000;
        let mean = (0..n)
            .map(|_| spec.sample_q(&mut rng).unwrap().as_matrix()[(0, 0)].powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.01).abs() < 0.0005);
    }

    #[test]
    fn k1_marginal_is_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let spec = identity_spec(20, 1, EntryLaw::shrinkage(0.4).unwrap());
        let q2: Vec<f64> = (0..100_000)
            .map(|_| spec.sample_q(&mut rng).unwrap().as_matrix()[(0, 0)].powi(2))
            .collect();
        let gap = ks_against(&q2, |x| beta_reg(0.2, 3.8, x.clamp(0.0, 1.0)));
        assert!(gap < 0.01, "{gap}");
    }

    #[test]
    fn draws_are_semi_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let omega = Arc::new(
            CorrelationMatrix::new(CorrelationFamily::Matern { rho: 4.0, nu: 2.0 }, 40, 1.0)
                .unwrap(),
        );
        let spec = StructuredPriorSpec::new(40, 3, EntryLaw::StandardNormal, omega).unwrap();
        for _ in 0..20 {
            let q = spec.sample_q(&mut rng).unwrap();
            assert!(orthogonality_defect(q.as_matrix()) < 1e-10);
        }
    }

    #[test]
    fn signed_permutation_pathwise_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let spec = identity_spec(12, 3, EntryLaw::shrinkage(0.2).unwrap());
        for _ in 0..20 {
            let x = spec.sample_x(&mut rng).unwrap();
            let perm: Vec<usize> = (0..12).rev().collect();
            let l = DMatrix::from_fn(12, 12, |i, j| {
                if perm[i] == j {
                    if i % 3 == 0 {
                        -1.0
                    } else {
                        1.0
                    }
                } else {
                    0.0
                }
            });
            let lhs = polar_q(&(&l * &x)).unwrap();
            let rhs = &l * polar_q(&x).unwrap();
            assert!((lhs - rhs).amax() < 1e-9);
        }
    }

    #[test]
    fn entry_law_serde() {
        let law: EntryLaw = serde_json::from_str(r#"{"law":"shrinkage","ell":0.1}"#).unwrap();
        assert_eq!(law, EntryLaw::shrinkage(0.1).unwrap());
        assert!(serde_json::from_str::<EntryLaw>(r#"{"law":"shrinkage","ell":1.5}"#).is_err());
        let law: EntryLaw = serde_json::from_str(r#"{"law":"standard_normal"}"#).unwrap();
        assert_eq!(law, EntryLaw::StandardNormal);
    }
}
