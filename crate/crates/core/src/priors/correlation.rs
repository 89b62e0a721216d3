//! Stationary correlation families on a regular grid and the resulting Toeplitz matrices.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::bessel::ln_bessel_k;
use crate::error::{domain, Error, Result};
use crate::linalg::sqrt_psd;

const PSD_REJECT: f64 = 1e-6;
const PSD_ROUNDOFF: f64 = 1e-8;
const UNIT_DIAG_TOL: f64 = 1e-12;

/// Correlation as a function of grid distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationFamily {
    Identity,
    /// `ρ^d`, `0 < ρ < 1`.
    Power {
        rho: f64,
    },
    /// `exp(−d²/2ρ²)`.
    SquaredExponential {
        rho: f64,
    },
    Matern {
        rho: f64,
        nu: f64,
    },
    /// `inner` with every entry beyond `tau` grid steps from the diagonal set to zero.
    Banded {
        inner: Box<CorrelationFamily>,
        tau: usize,
    },
}

impl CorrelationFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelationFamily::Identity => Ok(()),
            CorrelationFamily::Power { rho } => {
                if *rho > 0.0 && *rho < 1.0 {
                    Ok(())
                } else {
                    Err(domain(format!(
                        "power correlation needs rho in (0, 1), got {rho}"
                    )))
                }
            }
            CorrelationFamily::SquaredExponential { rho } => positive("rho", *rho),
            CorrelationFamily::Matern { rho, nu } => {
                positive("rho", *rho)?;
                positive("nu", *nu)
            }
            CorrelationFamily::Banded { inner, .. } => inner.validate(),
        }
    }

    /// Correlation at grid lag `lag` (in steps) for grid spacing `spacing`.
    pub fn at_lag(&self, lag: usize, spacing: f64) -> Result<f64> {
        let d = lag as f64 * spacing;
        match self {
            CorrelationFamily::Identity => Ok(if lag == 0 { 1.0 } else { 0.0 }),
            CorrelationFamily::Power { rho } => Ok(rho.powf(d)),
            CorrelationFamily::SquaredExponential { rho } => Ok(se_corr(d, *rho)),
            CorrelationFamily::Matern { rho, nu } => matern_corr(d, *rho, *nu),
            CorrelationFamily::Banded { inner, tau } => {
                if lag > *tau {
                    Ok(0.0)
                } else {
                    inner.at_lag(lag, spacing)
                }
            }
        }
    }

    fn is_identity(&self) -> bool {
        matches!(
            self,
            CorrelationFamily::Identity | CorrelationFamily::Banded { tau: 0, .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorrelationFamily::Identity => "identity",
            CorrelationFamily::Power { .. } => "power",
            CorrelationFamily::SquaredExponential { .. } => "squared_exponential",
            CorrelationFamily::Matern { .. } => "matern",
            CorrelationFamily::Banded { .. } => "banded",
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Squared-exponential correlation `exp(−d²/2ρ²)`.
pub fn se_corr(d: f64, rho: f64) -> f64 {
    (-0.5 * (d / rho).powi(2)).exp()
}

/// Matérn correlation `2^{1−ν}/Γ(ν) · x^ν K_ν(x)` with `x = √(2ν) d/ρ`, computed in logs.
pub fn matern_corr(d: f64, rho: f64, nu: f64) -> Result<f64> {
    positive("rho", rho)?;
    positive("nu", nu)?;
    if !(d >= 0.0) || !d.is_finite() {
        return Err(domain(format!("distance must be finite and >= 0, got {d}")));
    }
    if d == 0.0 {
        return Ok(1.0);
    }
    let x = (2.0 * nu).sqrt() * d / rho;
    let ln_c =
        (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * x.ln() + ln_bessel_k(nu, x)?;
    Ok(ln_c.exp().min(1.0))
}

/// A p×p unit-diagonal correlation matrix with a lazily computed symmetric square root.
#[derive(Debug)]
pub struct CorrelationMatrix {
    family: Option<CorrelationFamily>,
    spacing: f64,
    entries: DMatrix<f64>,
    root: OnceLock<Result<DMatrix<f64>>>,
}

impl Clone for CorrelationMatrix {
    fn clone(&self) -> Self {
        Self {
            family: self.family.clone(),
            spacing: self.spacing,
            entries: self.entries.clone(),
            root: self.root.clone(),
        }
    }
}

impl PartialEq for CorrelationMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.spacing == other.spacing
            && self.entries == other.entries
    }
}

impl CorrelationMatrix {
    /// `Ω_ij = C(Δ·|i−j|)` for the given family.
    pub fn new(family: CorrelationFamily, p: usize, spacing: f64) -> Result<Self> {
        if p == 0 {
            return Err(domain("correlation matrix needs p >= 1"));
        }
        positive("spacing", spacing)?;
        family.validate()?;
        if let CorrelationFamily::Banded { tau, .. } = &family {
            if *tau >= p {
                return Err(domain(format!(
                    "bandwidth tau = {tau} must be below p = {p}"
                )));
            }
        }
        let lags = (0..p)
            .map(|lag| family.at_lag(lag, spacing))
            .collect::<Result<Vec<_>>>()?;
        let entries = DMatrix::from_fn(p, p, |i, j| lags[i.abs_diff(j)]);
        if matches!(family, CorrelationFamily::Banded { .. }) && !family.is_identity() {
            let min = entries.clone().symmetric_eigenvalues().min();
            if min < -PSD_REJECT {
                return Err(Error::NotPsd {
                    min_eigenvalue: min,
                });
            }
        }
        Ok(Self {
            family: Some(family),
            spacing,
            entries,
            root: OnceLock::new(),
        })
    }

    pub fn identity(p: usize) -> Self {
        Self::new(CorrelationFamily::Identity, p, 1.0).expect("identity is valid")
    }

    /// Wraps an explicit matrix after checking unit diagonal, symmetry and PSD up to roundoff.
    pub fn from_entries(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "correlation matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.diagonal().iter().any(|d| (d - 1.0).abs() > UNIT_DIAG_TOL) {
            return Err(domain("correlation matrix must have unit diagonal"));
        }
        if (&m - m.transpose()).amax() > UNIT_DIAG_TOL {
            return Err(domain("correlation matrix must be symmetric"));
        }
        let min = m.clone().symmetric_eigenvalues().min();
        if min < -PSD_ROUNDOFF {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(Self {
            family: None,
            spacing: 1.0,
            entries: m,
            root: OnceLock::new(),
        })
    }

    /// `None` for matrices supplied entrywise.
    pub fn family(&self) -> Option<&CorrelationFamily> {
        self.family.as_ref()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        match &self.family {
            Some(f) => f.is_identity(),
            None => self.entries == DMatrix::identity(self.p(), self.p()),
        }
    }

    /// Symmetric square root `Ω^{1/2}`, computed once. Roundoff-level negative eigenvalues
    /// (common for smooth kernels) are clamped to zero.
    pub fn sqrt(&self) -> Result<&DMatrix<f64>> {
        self.root
            .get_or_init(|| {
                if self.is_identity() {
                    Ok(DMatrix::identity(self.p(), self.p()))
                } else {
                    sqrt_psd(&self.entries, PSD_ROUNDOFF)
                }
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `c_Ω(p) = Tr(Ω²)/p`.
    pub fn c_omega(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>() / self.p() as f64
    }
}

/// Free-function constructor.
pub fn correlation_matrix(
    family: CorrelationFamily,
    p: usize,
    spacing: f64,
) -> Result<CorrelationMatrix> {
    CorrelationMatrix::new(family, p, spacing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_example() {
        let m = CorrelationMatrix::new(CorrelationFamily::Power { rho: 0.5 }, 3, 1.0).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        assert_eq!(m.entries(), &want);
    }

    #[test]
    fn se_example_and_spacing() {
        let m = CorrelationMatrix::new(CorrelationFamily::SquaredExponential { rho: 1.0 }, 3, 1.0)
            .unwrap();
        assert!((m.entries()[(0, 1)] - 0.606_530_7).abs() < 1e-7);
        let m2 = CorrelationMatrix::new(CorrelationFamily::SquaredExponential { rho: 1.0 }, 3, 2.0)
            .unwrap();
        assert!((m2.entries()[(0, 1)] - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn banded_zero_is_identity() {
        let fam = CorrelationFamily::Banded {
            inner: Box::new(CorrelationFamily::Power { rho: 0.9 }),
            tau: 0,
        };
        let m = CorrelationMatrix::new(fam, 5, 1.0).unwrap();
        assert_eq!(m.entries(), &DMatrix::<f64>::identity(5, 5));
        assert!(m.is_identity());
    }

    #[test]
    fn banded_indefinite_rejected() {
        // Truncating a slowly decaying kernel at τ = 1 loses definiteness.
        let fam = CorrelationFamily::Banded {
            inner: Box::new(CorrelationFamily::SquaredExponential { rho: 5.0 }),
            tau: 1,
        };
        assert!(matches!(
            CorrelationMatrix::new(fam, 20, 1.0),
            Err(Error::NotPsd { .. })
        ));
        let ok = CorrelationFamily::Banded {
            inner: Box::new(CorrelationFamily::Power { rho: 0.3 }),
            tau: 2,
        };
        assert!(CorrelationMatrix::new(ok, 20, 1.0).is_ok());
    }

    #[test]
    fn parameter_errors() {
        assert!(CorrelationMatrix::new(CorrelationFamily::Power { rho: 1.0 }, 3, 1.0).is_err());
        assert!(
            CorrelationMatrix::new(CorrelationFamily::Matern { rho: 1.0, nu: 0.0 }, 3, 1.0)
                .is_err()
        );
        assert!(
            CorrelationMatrix::new(CorrelationFamily::SquaredExponential { rho: 1.0 }, 0, 1.0)
                .is_err()
        );
        assert!(
            CorrelationMatrix::new(CorrelationFamily::SquaredExponential { rho: 1.0 }, 3, 0.0)
                .is_err()
        );
        let fam = CorrelationFamily::Banded {
            inner: Box::new(CorrelationFamily::Identity),
            tau: 3,
        };
        assert!(CorrelationMatrix::new(fam, 3, 1.0).is_err());
        assert!(matern_corr(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn matern_closed_forms() {
        assert_eq!(matern_corr(0.0, 2.0, 1.3).unwrap(), 1.0);
        assert!((matern_corr(1.0, 1.0, 0.5).unwrap() - 0.367_879_4).abs() < 1e-7);
        assert!((matern_corr(1.0, 1.0, 1.5).unwrap() - 0.483_357_7).abs() < 1e-7);
        for i in 0..50 {
            let d = i as f64 * 0.37;
            let rho = 2.5;
            assert!((matern_corr(d, rho, 0.5).unwrap() - (-d / rho).exp()).abs() < 1e-12);
            let x = 3f64.sqrt() * d / rho;
            assert!((matern_corr(d, rho, 1.5).unwrap() - (1.0 + x) * (-x).exp()).abs() < 1e-12);
            let x = 5f64.sqrt() * d / rho;
            let want = (1.0 + x + x * x / 3.0) * (-x).exp();
            assert!((matern_corr(d, rho, 2.5).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn matern_approaches_se() {
        let rho = 1.7;
        for i in 0..=60 {
            let d = 3.0 * rho * i as f64 / 60.0;
            let gap = (matern_corr(d, rho, 200.0).unwrap() - se_corr(d, rho)).abs();
            assert!(gap < 5e-3, "d={d}: {gap}");
        }
    }

    #[test]
    fn sqrt_is_cached_and_correct() {
        let m = CorrelationMatrix::new(CorrelationFamily::Matern { rho: 3.0, nu: 1.5 }, 30, 1.0)
            .unwrap();
        let r1 = m.sqrt().unwrap() as *const _;
        let r2 = m.sqrt().unwrap() as *const _;
        assert_eq!(r1, r2);
        let r = m.sqrt().unwrap();
        assert!((r * r - m.entries()).amax() < 1e-10);
    }

    #[test]
    fn singular_se_has_a_root() {
        let m = CorrelationMatrix::new(
            CorrelationFamily::SquaredExponential { rho: 25.0 },
            100,
            2.0,
        )
        .unwrap();
        let r = m.sqrt().unwrap();
        assert!((r * r - m.entries()).amax() < 1e-6);
    }

    #[test]
    fn c_omega_identity_and_power() {
        assert_eq!(CorrelationMatrix::identity(17).c_omega(), 1.0);
        let m = CorrelationMatrix::new(CorrelationFamily::Power { rho: 0.5 }, 2000, 1.0).unwrap();
        assert!((m.c_omega() - 5.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn from_entries_checks() {
        assert!(CorrelationMatrix::from_entries(DMatrix::identity(3, 3))
            .unwrap()
            .is_identity());
        let bad_diag = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(CorrelationMatrix::from_entries(bad_diag).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            CorrelationMatrix::from_entries(indefinite),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn serde_round_trip() {
        let fam = CorrelationFamily::Banded {
            inner: Box::new(CorrelationFamily::Matern { rho: 12.0, nu: 3.0 }),
            tau: 4,
        };
        let s = serde_json::to_string(&fam).unwrap();
        assert_eq!(serde_json::from_str::<CorrelationFamily>(&s).unwrap(), fam);
        assert!(
            serde_json::from_str::<CorrelationFamily>(r#"{"family":"power","rho":0.5,"x":1}"#)
                .is_err()
        );
    }

    fn family_strategy() -> impl Strategy<Value = CorrelationFamily> {
        prop_oneof![
            Just(CorrelationFamily::Identity),
            (0.01f64..0.99).prop_map(|rho| CorrelationFamily::Power { rho }),
            (0.1f64..20.0).prop_map(|rho| CorrelationFamily::SquaredExponential { rho }),
            (0.1f64..20.0, 0.2f64..6.0).prop_map(|(rho, nu)| CorrelationFamily::Matern { rho, nu }),
            (0.01f64..0.3, 0usize..4).prop_map(|(rho, tau)| CorrelationFamily::Banded {
                inner: Box::new(CorrelationFamily::Power { rho }),
                tau
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn unit_diagonal_and_symmetric(fam in family_strategy(), p in 5usize..40, spacing in 0.5f64..3.0) {
            let m = CorrelationMatrix::new(fam, p, spacing).unwrap();
            let e = m.entries();
            for i in 0..p {
                prop_assert_eq!(e[(i, i)], 1.0);
                for j in 0..p {
                    prop_assert_eq!(e[(i, j)], e[(j, i)]);
                }
            }
        }
    }
}
