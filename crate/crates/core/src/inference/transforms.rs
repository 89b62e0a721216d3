//! Constraint transforms between parameter values and unconstrained HMC coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Support of a scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    None,
    Interval { a: f64, b: f64 },
    Positive,
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function.
pub fn expit(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl Constraint {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Constraint::Interval { a, b } if !(a < b) || !a.is_finite() || !b.is_finite() => {
                Err(domain(format!(
                    "interval constraint needs finite a < b, got ({a}, {b})"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `(u, log|dx/du|)` for a value strictly inside the support.
    pub fn to_unconstrained(&self, x: f64) -> Result<(f64, f64)> {
        match *self {
            Constraint::None => {
                if x.is_finite() {
                    Ok((x, 0.0))
                } else {
                    Err(domain(format!("value must be finite, got {x}")))
                }
            }
            Constraint::Positive => {
                if x > 0.0 && x.is_finite() {
                    let u = x.ln();
                    Ok((u, u))
                } else {
                    Err(domain(format!("value must be positive, got {x}")))
                }
            }
            Constraint::Interval { a, b } => {
                if x > a && x < b {
                    let t = (x - a) / (b - a);
                    let u = t.ln() - (1.0 - t).ln();
                    Ok((u, self.log_jacobian(u)))
                } else {
                    Err(domain(format!("value must lie in ({a}, {b}), got {x}")))
                }
            }
        }
    }

    /// Maps an unconstrained coordinate into the support.
    pub fn to_constrained(&self, u: f64) -> f64 {
        match *self {
            Constraint::None => u,
            Constraint::Positive => u.exp(),
            Constraint::Interval { a, b } => a + (b - a) * expit(u),
        }
    }

    /// `log|dx/du|` at `u`.
    pub fn log_jacobian(&self, u: f64) -> f64 {
        match *self {
            Constraint::None => 0.0,
            Constraint::Positive => u,
            Constraint::Interval { a, b } => (b - a).ln() - softplus(-u) - softplus(u),
        }
    }

    /// `(x, dx/du, d log|dx/du| / du)` at `u`.
    pub fn forward(&self, u: f64) -> (f64, f64, f64) {
        match *self {
            Constraint::None => (u, 1.0, 0.0),
            Constraint::Positive => {
                let x = u.exp();
                (x, x, 1.0)
            }
            Constraint::Interval { a, b } => {
                let s = expit(u);
                (a + (b - a) * s, (b - a) * s * (1.0 - s), 1.0 - 2.0 * s)
            }
        }
    }
}

/// Free-function form of [`Constraint::to_unconstrained`].
pub fn to_unconstrained(x: f64, c: &Constraint) -> Result<(f64, f64)> {
    c.to_unconstrained(x)
}

/// Free-function form of [`Constraint::to_constrained`].
pub fn to_constrained(u: f64, c: &Constraint) -> f64 {
    c.to_constrained(u)
}
