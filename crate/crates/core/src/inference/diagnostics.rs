//! Split-R̂ and multi-chain effective sample size.

use crate::error::{Error, Result};

const MIN_CHAINS: usize = 2;
const MIN_DRAWS: usize = 100;

/// Per-parameter convergence summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub ess: Vec<f64>,
    /// NaN for parameters with zero posterior variance.
    pub split_rhat: Vec<f64>,
    pub mean_accept: f64,
}

fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check(chains: &[&[f64]]) -> Result<()> {
    if chains.len() < MIN_CHAINS || chains.iter().any(|c| c.len() < MIN_DRAWS) {
        return Err(Error::TooFewDraws {
            min_chains: MIN_CHAINS,
            min_draws: MIN_DRAWS,
        });
    }
    Ok(())
}

/// `(W, var⁺, chain means)` for equal-length chains.
fn variance_parts(chains: &[Vec<f64>]) -> (f64, f64, Vec<f64>) {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    let var_plus = (n - 1.0) / n * w + b / n;
    (w, var_plus, means)
}

/// Split-R̂ of one scalar quantity.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64> {
    check(chains)?;
    let s = split(chains);
    let (w, var_plus, _) = variance_parts(&s);
    if w <= 0.0 || !w.is_finite() {
        return Ok(f64::NAN);
    }
    Ok((var_plus / w).sqrt())
}

/// Effective sample size from split chains using Geyer's initial monotone sequence.
pub fn ess(chains: &[&[f64]]) -> Result<f64> {
    check(chains)?;
    let s = split(chains);
    let m = s.len();
    let n = s[0].len();
    let total = (m * n) as f64;
    let (w, var_plus, means) = variance_parts(&s);
    if var_plus <= 0.0 || !var_plus.is_finite() {
        return Ok(total);
    }
    // Biased (1/n) autocovariance at lag t averaged over chains.
    let acov = |t: usize| -> f64 {
        s.iter()
            .zip(&means)
            .map(|(c, mu)| {
                (0..n - t)
                    .map(|i| (c[i] - mu) * (c[i + t] - mu))
                    .sum::<f64>()
                    / n as f64
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |t: usize| 1.0 - (w - acov(t)) / var_plus;
    let mut tau = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let p0 = rho(t);
        let p1 = rho(t + 1);
        let mut pair = p0 + p1;
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        prev_pair = pair;
        tau += pair;
        t += 2;
    }
    let tau = (2.0 * tau - 1.0).max(1.0 / total.log10().max(1.0));
    Ok(total / tau)
}

/// ESS and split-R̂ for every column of per-chain draw matrices (`chains[c][draw][param]`).
pub fn diagnostics(chains: &[Vec<Vec<f64>>], accept_rates: &[f64]) -> Result<Diagnostics> {
    if chains.is_empty() || chains[0].is_empty() {
        return Err(Error::TooFewDraws {
            min_chains: MIN_CHAINS,
            min_draws: MIN_DRAWS,
        });
    }
    let dim = chains[0][0].len();
    let mut out = Diagnostics {
        ess: Vec::with_capacity(dim),
        split_rhat: Vec::with_capacity(dim),
        mean_accept: mean(accept_rates),
    };
    for j in 0..dim {
        let cols: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|d| d[j]).collect())
            .collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        out.ess.push(ess(&refs)?);
        out.split_rhat.push(split_rhat(&refs)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_chains(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    fn refs(c: &[Vec<f64>]) -> Vec<&[f64]> {
        c.iter().map(|v| v.as_slice()).collect()
    }

    #[test]
    fn iid_chains() {
        let c = normal_chains(4, 1000, 1);
        let r = split_rhat(&refs(&c)).unwrap();
        assert!(r > 0.99 && r < 1.01, "{r}");
        let e = ess(&refs(&c)).unwrap();
        assert!(e / 4000.0 > 0.8 && e <= 1.5 * 4000.0, "{e}");
    }

    #[test]
    fn separated_chains() {
        let mut c = normal_chains(2, 500, 2);
        c[0].iter_mut().for_each(|v| *v += 5.0);
        c[1].iter_mut().for_each(|v| *v -= 5.0);
        assert!(split_rhat(&refs(&c)).unwrap() > 2.0);
    }

    #[test]
    fn autocorrelated_chain_has_lower_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi: f64 = 0.9;
        let c: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..2000)
                    .map(|_| {
                        x = phi * x
                            + (1.0 - phi * phi).sqrt() * rng.sample::<f64, _>(StandardNormal);
                        x
                    })
                    .collect()
            })
            .collect();
        // AR(1) integrated autocorrelation time is (1+φ)/(1−φ) = 19.
        let e = ess(&refs(&c)).unwrap();
        let want = 8000.0 / 19.0;
        assert!((e / want - 1.0).abs() < 0.3, "{e} vs {want}");
    }

    #[test]
    fn constant_chain() {
        let c = vec![vec![1.0; 200]; 3];
        assert_eq!(ess(&refs(&c)).unwrap(), 600.0);
        assert!(split_rhat(&refs(&c)).unwrap().is_nan());
    }

    #[test]
    fn too_few() {
        let c = normal_chains(1, 500, 4);
        assert!(matches!(
            split_rhat(&refs(&c)),
            Err(Error::TooFewDraws { .. })
        ));
        let c = normal_chains(3, 50, 4);
        assert!(matches!(ess(&refs(&c)), Err(Error::TooFewDraws { .. })));
    }
}
