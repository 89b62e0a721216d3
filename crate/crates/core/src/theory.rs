//! Empirical checks of the asymptotic theory: pathwise invariance, the Frobenius coupling
//! identity, Wasserstein decay of projected entries, the renormalized covariance and its
//! semicircle limit, operator-norm concentration, and GP zero crossings.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{orthogonality_defect, polar_q, spectral_norm_sym, symmetrize, Polar};
use crate::priors::{CorrelationFamily, CorrelationMatrix, EntryLaw, StructuredPriorSpec};
use crate::rng::{cell_stream, stream_rng};

const ORTHO_TOL: f64 = 1e-10;

/// `(‖√p Q_X − X‖²_F, p(k − 2 Tr S_p^{1/2} + Tr S_p))` with `S_p = XᵀX/p`.
pub fn coupled_frobenius_identity(x: &DMatrix<f64>) -> Result<(f64, f64)> {
    let polar = Polar::new(x)?;
    let (p, k) = x.shape();
    let sp = (p as f64).sqrt();
    let lhs = (polar.q() * sp - x).norm_squared();
    // Eigenvalues of S_p are d_j²/p.
    let tr_sqrt: f64 = polar.d.iter().map(|d| d / sp).sum();
    let tr: f64 = polar.d.iter().map(|d| d * d / p as f64).sum();
    let rhs = p as f64 * (k as f64 - 2.0 * tr_sqrt + tr);
    Ok((lhs, rhs))
}

/// Exact order-2 Wasserstein distance between two equal-size empirical distributions on ℝ.
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(domain("w2_1d needs at least one sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let ss: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Exact order-2 Wasserstein distance between two equal-size empirical distributions on ℝ^m,
/// by solving the assignment problem (Hungarian algorithm, O(n³)).
pub fn w2_empirical(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: b.len(),
        });
    }
    if n == 0 {
        return Err(domain("w2_empirical needs at least one sample"));
    }
    let cost = |i: usize, j: usize| -> f64 {
        a[i].iter().zip(&b[j]).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let assignment = hungarian(n, cost);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost(i, j))
        .sum();
    Ok((total / n as f64).sqrt())
}

/// Minimum-cost perfect matching on an n×n cost matrix; returns the column for each row.
fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // Potentials formulation with 1-based sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[matched[j] - 1] = j - 1;
    }
    out
}

/// Entry law and correlation family; `p` is filled in per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorTemplate {
    pub entry_law: EntryLaw,
    pub correlation: CorrelationFamily,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

fn default_spacing() -> f64 {
    1.0
}

impl PriorTemplate {
    pub fn build(&self, p: usize, k: usize) -> Result<StructuredPriorSpec> {
        let omega = CorrelationMatrix::new(self.correlation.clone(), p, self.spacing)?;
        StructuredPriorSpec::new(p, k, self.entry_law, std::sync::Arc::new(omega))
    }
}

/// Result of [`wasserstein_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinReport {
    pub p_grid: Vec<usize>,
    pub k: usize,
    /// Entry coordinates `(row, col)`, zero-based.
    pub entries: Vec<(usize, usize)>,
    pub replicates: usize,
    /// Per-p mean over entries of the 1-D W2 between `√p·Q_ij` and `X_ij`.
    pub estimates: Vec<f64>,
    /// Per-p bootstrap standard error of `estimates`.
    pub mc_se: Vec<f64>,
    /// Per-p, per-entry 1-D W2.
    pub per_entry: Vec<Vec<f64>>,
    /// Per-p `(mean over replicates of ‖X(m) − √p Q(m)‖²)^{1/2}`, an upper bound on the m-variate W2.
    pub coupled_bound: Vec<f64>,
}

impl WassersteinReport {
    /// Each estimate is no larger than its predecessor plus two combined standard errors.
    pub fn monotone_decay(&self) -> bool {
        self.estimates
            .windows(2)
            .zip(self.mc_se.windows(2))
            .all(|(e, s)| e[1] <= e[0] + 2.0 * (s[0] * s[0] + s[1] * s[1]).sqrt())
    }
}

/// Paired draws `(X(m), √p·Q(m))` restricted to the chosen entries, one row per replicate.
pub fn paired_entry_draws(
    spec: &StructuredPriorSpec,
    entries: &[(usize, usize)],
    replicates: usize,
    seed: u64,
    cell: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let sp = (spec.p() as f64).sqrt();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, cell_stream(cell, r));
            let x = spec.sample_x(&mut rng)?;
            let q = polar_q(&x)?;
            Ok((
                entries.iter().map(|&(i, j)| x[(i, j)]).collect(),
                entries.iter().map(|&(i, j)| sp * q[(i, j)]).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().unzip())
}

fn column(rows: &[Vec<f64>], e: usize) -> Vec<f64> {
    rows.iter().map(|r| r[e]).collect()
}

const BOOTSTRAP: usize = 200;

/// Wasserstein distance between projected and unprojected entries over a grid of `p`.
pub fn wasserstein_experiment(
    template: &PriorTemplate,
    p_grid: &[usize],
    k: usize,
    entries: &[(usize, usize)],
    replicates: usize,
    seed: u64,
) -> Result<WassersteinReport> {
    if p_grid.is_empty() || entries.is_empty() || replicates < 2 {
        return Err(domain(
            "need a nonempty grid, at least one entry and two replicates",
        ));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("p grid must be strictly increasing"));
    }
    let p_min = p_grid[0];
    if let Some(&(i, j)) = entries.iter().find(|&&(i, j)| i >= p_min || j >= k) {
        return Err(domain(format!(
            "entry ({i}, {j}) out of range for p = {p_min}, k = {k}"
        )));
    }
    let m = entries.len();
    let mut report = WassersteinReport {
        p_grid: p_grid.to_vec(),
        k,
        entries: entries.to_vec(),
        replicates,
        estimates: Vec::new(),
        mc_se: Vec::new(),
        per_entry: Vec::new(),
        coupled_bound: Vec::new(),
    };
    for (cell, &p) in p_grid.iter().enumerate() {
        let spec = template.build(p, k)?;
        let (xs, qs) = paired_entry_draws(&spec, entries, replicates, seed, cell)?;
        let per_entry = (0..m)
            .map(|e| w2_1d(&column(&xs, e), &column(&qs, e)))
            .collect::<Result<Vec<_>>>()?;
        let estimate = per_entry.iter().sum::<f64>() / m as f64;
        let boot: Vec<f64> = (0..BOOTSTRAP)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(seed ^ 0x5eed_b007, cell_stream(cell, b));
                let idx: Vec<usize> = (0..replicates)
                    .map(|_| rng.random_range(0..replicates))
                    .collect();
                (0..m)
                    .map(|e| {
                        let a: Vec<f64> = idx.iter().map(|&r| xs[r][e]).collect();
                        let c: Vec<f64> = idx.iter().map(|&r| qs[r][e]).collect();
                        w2_1d(&a, &c).expect("equal lengths")
                    })
                    .sum::<f64>()
                    / m as f64
            })
            .collect();
        let bmean = boot.iter().sum::<f64>() / BOOTSTRAP as f64;
        let se =
            (boot.iter().map(|v| (v - bmean).powi(2)).sum::<f64>() / (BOOTSTRAP - 1) as f64).sqrt();
        let coupled = xs
            .iter()
            .zip(&qs)
            .map(|(x, q)| x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            / replicates as f64;
        report.estimates.push(estimate);
        report.mc_se.push(se);
        report.per_entry.push(per_entry);
        report.coupled_bound.push(coupled.sqrt());
    }
    Ok(report)
}

/// `A_k = (ZᵀΩZ − pI)/√(kp·c_Ω(p))` and `c_Ω(p) = Tr(Ω²)/p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizedCovariance {
    pub a_k: DMatrix<f64>,
    pub c_omega: f64,
}

pub fn renormalized_covariance(
    z: &DMatrix<f64>,
    omega: &CorrelationMatrix,
) -> Result<RenormalizedCovariance> {
    let (p, k) = z.shape();
    if omega.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "Z has {p} rows but the correlation matrix is {}x{}",
            omega.p(),
            omega.p()
        )));
    }
    let c_omega = omega.c_omega();
    let gram = if omega.is_identity() {
        z.transpose() * z
    } else {
        z.transpose() * omega.entries() * z
    };
    let scale = 1.0 / ((k * p) as f64 * c_omega).sqrt();
    let a_k = symmetrize(&((gram - DMatrix::<f64>::identity(k, k) * p as f64) * scale));
    Ok(RenormalizedCovariance { a_k, c_omega })
}

/// Semicircle CDF on [−2, 2].
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI)
            + (x / 2.0).asin() / std::f64::consts::PI
    }
}

/// Kolmogorov distance between the empirical eigenvalue distribution and the semicircle law.
pub fn semicircle_distance(eigs: &[f64]) -> f64 {
    crate::stats::ks_against(eigs, semicircle_cdf)
}

/// `‖XᵀX/p − I‖₂ / √(c_Ω k/p)`.
pub fn operator_norm_ratio(x: &DMatrix<f64>, c_omega: f64) -> Result<f64> {
    Polar::new(x)?;
    let (p, k) = x.shape();
    let s = x.transpose() * x / p as f64 - DMatrix::<f64>::identity(k, k);
    Ok(spectral_norm_sym(&symmetrize(&s)) / (c_omega * k as f64 / p as f64).sqrt())
}

/// `‖Q_{LXR} − L Q_X R‖_F` for orthogonal `L` and `R`.
pub fn invariance_check(x: &DMatrix<f64>, l: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    let (p, k) = x.shape();
    if l.shape() != (p, p) || r.shape() != (k, k) {
        return Err(Error::DimensionMismatch("L must be p×p and R k×k".into()));
    }
    for m in [l, r] {
        let dev = orthogonality_defect(m);
        if dev > ORTHO_TOL {
            return Err(Error::NotOrthogonal { deviation: dev });
        }
    }
    let lhs = polar_q(&(l * x * r))?;
    let rhs = l * polar_q(x)? * r;
    Ok((lhs - rhs).norm())
}

/// Sign changes between consecutive entries; zero counts as positive.
pub fn count_zero_crossings(v: &[f64]) -> usize {
    v.windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_semi_orthogonal};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn frobenius_identity_examples() {
        let mut r = rng(41);
        let q = random_semi_orthogonal(4, 1, &mut r).unwrap().into_inner();
        let (lhs, rhs) = coupled_frobenius_identity(&q).unwrap();
        assert!((lhs - 1.0).abs() < 1e-12 && (rhs - 1.0).abs() < 1e-12);

        let q = random_semi_orthogonal(9, 2, &mut r).unwrap().into_inner();
        let (lhs, rhs) = coupled_frobenius_identity(&(q * 3.0)).unwrap();
        assert!(lhs < 1e-24 && rhs.abs() < 1e-12);

        for _ in 0..20 {
            let x = gaussian_matrix(50, 3, &mut r);
            let (lhs, rhs) = coupled_frobenius_identity(&x).unwrap();
            assert!((lhs - rhs).abs() / lhs.max(1.0) < 1e-8);
        }
    }

    #[test]
    fn w2_examples() {
        assert_eq!(w2_1d(&[1.0, 5.0, 2.0], &[5.0, 1.0, 2.0]).unwrap(), 0.0);
        assert!((w2_1d(&[0.0, 2.0], &[1.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        // Brute force over both couplings.
        let crossed = ((3.0f64.powi(2) + 1.0) / 2.0).sqrt();
        assert!(1.0 < crossed);
        assert!(matches!(
            w2_1d(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));

        let mut r = rng(42);
        let a: Vec<f64> = (0..100_000)
            .map(|_| r.sample(rand_distr::StandardNormal))
            .collect();
        let b: Vec<f64> = (0..100_000)
            .map(|_| 0.5 + r.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        assert!((w2_1d(&a, &b).unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn multivariate_w2_matches_brute_force() {
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for perm in permutations(n - 1) {
                for pos in 0..n {
                    let mut p = perm.clone();
                    p.insert(pos, n - 1);
                    out.push(p);
                }
            }
            out
        }
        let mut r = rng(43);
        for _ in 0..10 {
            let a: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..2).map(|_| r.random::<f64>()).collect())
                .collect();
            let b: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..2).map(|_| r.random::<f64>()).collect())
                .collect();
            let best = permutations(6)
                .iter()
                .map(|perm| {
                    perm.iter()
                        .enumerate()
                        .map(|(i, &j)| {
                            a[i].iter()
                                .zip(&b[j])
                                .map(|(x, y)| (x - y).powi(2))
                                .sum::<f64>()
                        })
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            let got = w2_empirical(&a, &b).unwrap();
            assert!((got - (best / 6.0).sqrt()).abs() < 1e-12);
        }
        // In one dimension it reduces to sorted pairing.
        let a: Vec<f64> = (0..30).map(|_| r.random()).collect();
        let b: Vec<f64> = (0..30).map(|_| r.random()).collect();
        let wrap = |v: &[f64]| v.iter().map(|x| vec![*x]).collect::<Vec<_>>();
        assert!(
            (w2_empirical(&wrap(&a), &wrap(&b)).unwrap() - w2_1d(&a, &b).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn coupled_bound_dominates_empirical_w2() {
        let template = PriorTemplate {
            entry_law: EntryLaw::StandardNormal,
            correlation: CorrelationFamily::Power { rho: 0.5 },
            spacing: 1.0,
        };
        let spec = template.build(40, 2).unwrap();
        let entries = [(0, 0), (1, 0), (0, 1)];
        let (xs, qs) = paired_entry_draws(&spec, &entries, 150, 9, 0).unwrap();
        let emp = w2_empirical(&xs, &qs).unwrap();
        let report = wasserstein_experiment(&template, &[40], 2, &entries, 150, 9).unwrap();
        assert!(report.coupled_bound[0] >= emp);
        for e in 0..3 {
            assert!(report.per_entry[0][e] <= emp + 1e-12);
        }
    }

    #[test]
    fn wasserstein_decays_for_normal_entries() {
        let template = PriorTemplate {
            entry_law: EntryLaw::StandardNormal,
            correlation: CorrelationFamily::Identity,
            spacing: 1.0,
        };
        let report =
            wasserstein_experiment(&template, &[25, 100, 400], 1, &[(0, 0)], 2000, 3).unwrap();
        assert!(report.monotone_decay(), "{:?}", report.estimates);
        assert!(report.estimates.iter().all(|e| *e >= 0.0));
        assert!(report.mc_se.iter().all(|e| *e >= 0.0));
    }

    #[test]
    fn wasserstein_small_for_shrinkage_entries() {
        let template = PriorTemplate {
            entry_law: EntryLaw::shrinkage(0.1).unwrap(),
            correlation: CorrelationFamily::Identity,
            spacing: 1.0,
        };
        let report = wasserstein_experiment(&template, &[400], 3, &[(0, 0)], 2000, 4).unwrap();
        assert!(report.estimates[0] < 0.15, "{:?}", report.estimates);
    }

    #[test]
    fn square_case_reports() {
        let template = PriorTemplate {
            entry_law: EntryLaw::StandardNormal,
            correlation: CorrelationFamily::Identity,
            spacing: 1.0,
        };
        let report = wasserstein_experiment(&template, &[6], 6, &[(0, 0)], 200, 5).unwrap();
        assert!(report.estimates[0].is_finite());
        assert!(wasserstein_experiment(&template, &[10, 5], 1, &[(0, 0)], 10, 5).is_err());
        assert!(wasserstein_experiment(&template, &[5], 1, &[(5, 0)], 10, 5).is_err());
    }

    #[test]
    fn renormalized_covariance_cases() {
        let mut r = rng(44);
        let omega = CorrelationMatrix::identity(30);
        let z = gaussian_matrix(30, 3, &mut r);
        let rc = renormalized_covariance(&z, &omega).unwrap();
        assert_eq!(rc.c_omega, 1.0);
        assert!((&rc.a_k - rc.a_k.transpose()).amax() < 1e-12);

        let zero = renormalized_covariance(&DMatrix::zeros(30, 3), &omega).unwrap();
        let want = DMatrix::<f64>::identity(3, 3) * (-30.0 / 90f64.sqrt());
        assert!((zero.a_k - want).amax() < 1e-12);

        let power =
            CorrelationMatrix::new(CorrelationFamily::Power { rho: 0.5 }, 2000, 1.0).unwrap();
        let rc = renormalized_covariance(&DMatrix::zeros(2000, 1), &power).unwrap();
        assert!((rc.c_omega - 5.0 / 3.0).abs() < 1e-3);
        assert!(renormalized_covariance(&DMatrix::zeros(10, 1), &power).is_err());
    }

    #[test]
    fn semicircle_cases() {
        assert!((semicircle_distance(&[0.0; 8]) - 0.5).abs() < 1e-15);
        // Inverse-CDF draws by bisection.
        let n = 10_000;
        let eigs: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (-2.0, 2.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if semicircle_cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        assert!(semicircle_distance(&eigs) < 0.02);
    }

    fn semicircle_gap(p: usize, k: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let z = gaussian_matrix(p, k, &mut r);
        let rc = renormalized_covariance(&z, &CorrelationMatrix::identity(p)).unwrap();
        let eigs: Vec<f64> = rc.a_k.symmetric_eigenvalues().iter().copied().collect();
        semicircle_distance(&eigs)
    }

    #[test]
    fn semicircle_regime() {
        assert!(semicircle_gap(4000, 40, 45) < 0.1);
        let improved = (0..5)
            .filter(|&s| semicircle_gap(4000, 40, 100 + s) < semicircle_gap(500, 5, 200 + s))
            .count();
        assert!(improved >= 4, "{improved}");
    }

    #[test]
    fn operator_norm_cases() {
        let mut r = rng(46);
        let q = random_semi_orthogonal(50, 3, &mut r).unwrap().into_inner();
        assert!(operator_norm_ratio(&(q * 50f64.sqrt()), 1.0).unwrap() < 1e-12);
        let max = (0..50)
            .map(|_| operator_norm_ratio(&gaussian_matrix(2000, 20, &mut r), 1.0).unwrap())
            .fold(0.0, f64::max);
        assert!(max < 4.0, "{max}");
        let mean_ratio = |p: usize, r: &mut ChaCha8Rng| {
            let k = p.div_ceil(100);
            (0..20)
                .map(|_| operator_norm_ratio(&gaussian_matrix(p, k, r), 1.0).unwrap())
                .sum::<f64>()
                / 20.0
        };
        let small = mean_ratio(250, &mut r);
        let large = mean_ratio(2000, &mut r);
        assert!(large < small * 1.25, "{small} -> {large}");
    }

    #[test]
    fn invariance_cases() {
        let mut r = rng(47);
        let x = gaussian_matrix(8, 2, &mut r);
        let i8 = DMatrix::<f64>::identity(8, 8);
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!(invariance_check(&x, &i8, &i2).unwrap() < 1e-14);
        let rev = DMatrix::from_fn(8, 8, |i, j| if i + j == 7 { 1.0 } else { 0.0 });
        assert!(invariance_check(&x, &rev, &i2).unwrap() < 1e-9);
        let l = random_semi_orthogonal(8, 8, &mut r).unwrap().into_inner();
        let t: f64 = 0.7;
        let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(invariance_check(&x, &l, &rot).unwrap() < 1e-9);
        assert!(matches!(
            invariance_check(&x, &(i8 * 1.1), &i2),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn zero_crossing_cases() {
        assert_eq!(count_zero_crossings(&[1.0, 2.0, 3.0]), 0);
        assert_eq!(count_zero_crossings(&[1.0, -1.0, 1.0, -1.0]), 3);
        assert_eq!(count_zero_crossings(&[0.0, 1.0, -0.5, 0.0]), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn frobenius_identity_holds(seed in 0u64..100_000, p in 10usize..120, kk in 1usize..10, shrink in any::<bool>()) {
            let k = kk.min(p);
            let law = if shrink { EntryLaw::shrinkage(0.3).unwrap() } else { EntryLaw::StandardNormal };
            let mut r = rng(seed);
            let x = law.sample_matrix(p, k, &mut r);
            let (lhs, rhs) = coupled_frobenius_identity(&x).unwrap();
            prop_assert!((lhs - rhs).abs() / lhs.max(1.0) < 1e-8);
        }

        #[test]
        fn w2_is_a_metric(seed in 0u64..100_000, n in 1usize..40) {
            let mut r = rng(seed);
            let mut draw = || (0..n).map(|_| r.random::<f64>() * 4.0 - 2.0).collect::<Vec<f64>>();
            let (a, b, c) = (draw(), draw(), draw());
            prop_assert_eq!(w2_1d(&a, &b).unwrap(), w2_1d(&b, &a).unwrap());
            prop_assert!(w2_1d(&a, &c).unwrap() <= w2_1d(&a, &b).unwrap() + w2_1d(&b, &c).unwrap() + 1e-12);
        }

        #[test]
        fn invariance_under_signed_permutations(seed in 0u64..100_000) {
            let mut r = rng(seed);
            let x = gaussian_matrix(6, 2, &mut r);
            let mut perm: Vec<usize> = (0..6).collect();
            for i in (1..6).rev() {
                perm.swap(i, r.random_range(0..=i));
            }
            let signs: Vec<f64> = (0..6).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let l = DMatrix::from_fn(6, 6, |i, j| if perm[i] == j { signs[i] } else { 0.0 });
            let rr = random_semi_orthogonal(2, 2, &mut r).unwrap().into_inner();
            prop_assert!(invariance_check(&x, &l, &rr).unwrap() < 1e-9);
        }
    }
}
