//! Matrix angular central Gaussian density.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{logdet_spd, SemiOrthogonalMatrix};

/// `log f(Q | Σ) = −(k/2) log|Σ| − (p/2) log|QᵀΣ⁻¹Q|`, relative to the uniform law on the manifold.
pub fn macg_logpdf(q: &SemiOrthogonalMatrix, sigma: &DMatrix<f64>) -> Result<f64> {
    let (p, k) = (q.p(), q.k());
    if sigma.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!(
            "sigma is {}x{}, expected {p}x{p}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: sigma.clone().symmetric_eigenvalues().min(),
            threshold: 0.0,
        })?;
    let logdet_sigma = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let w = chol
        .l()
        .solve_lower_triangular(q.as_matrix())
        .expect("nonsingular factor");
    let inner = w.transpose() * w;
    Ok(-0.5 * k as f64 * logdet_sigma - 0.5 * p as f64 * logdet_spd(&inner)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_semi_orthogonal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_sigma(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = gaussian_matrix(p, p, rng);
        &a * a.transpose() + DMatrix::identity(p, p)
    }

    #[test]
    fn identity_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let q = random_semi_orthogonal(6, 2, &mut rng).unwrap();
        assert!(macg_logpdf(&q, &DMatrix::identity(6, 6)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn rotation_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..10 {
            let q = random_semi_orthogonal(7, 3, &mut rng).unwrap();
            let sigma = random_sigma(7, &mut rng);
            let base = macg_logpdf(&q, &sigma).unwrap();
            let r = random_semi_orthogonal(3, 3, &mut rng).unwrap();
            let qr = SemiOrthogonalMatrix::new(q.as_matrix() * r.as_matrix()).unwrap();
            assert!((macg_logpdf(&qr, &sigma).unwrap() - base).abs() < 1e-10);
            assert!((macg_logpdf(&q, &(&sigma * 3.7)).unwrap() - base).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let q = random_semi_orthogonal(5, 2, &mut rng).unwrap();
        let sigma = random_sigma(5, &mut rng);
        let inv = sigma.clone().try_inverse().unwrap();
        let want = -1.0 * sigma.determinant().ln()
            - 2.5
                * (q.as_matrix().transpose() * inv * q.as_matrix())
                    .determinant()
                    .ln();
        assert!((macg_logpdf(&q, &sigma).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn rejects_indefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let q = random_semi_orthogonal(3, 1, &mut rng).unwrap();
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(matches!(
            macg_logpdf(&q, &bad),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            macg_logpdf(&q, &DMatrix::identity(4, 4)),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
