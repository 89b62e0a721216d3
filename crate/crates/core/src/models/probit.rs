//! Standard normal CDF on the log scale.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

const ASYMPTOTIC_BELOW: f64 = -30.0;

/// `Φ(x)`.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

fn tail_series(x: f64) -> f64 {
    let r = 1.0 / (x * x);
    1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r))
}

/// `log Φ(x)`, accurate in both tails.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x < ASYMPTOTIC_BELOW {
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * PI).ln() + tail_series(x).ln()
    } else if x < 0.0 {
        norm_cdf(x).ln()
    } else {
        (-0.5 * erfc(x * FRAC_1_SQRT_2)).ln_1p()
    }
}

/// `d log Φ(x) / dx = φ(x)/Φ(x)`.
pub fn d_log_norm_cdf(x: f64) -> f64 {
    if x < ASYMPTOTIC_BELOW {
        -x / tail_series(x)
    } else {
        let phi = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        phi / norm_cdf(x)
    }
}
