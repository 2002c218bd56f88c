//! Posterior-mean estimator of `ln σ` under squared error.
//!
//! Prior: `σ ~ InvGamma(ν, σ₀)` and, given `σ`, independent
//! `θ_i = μ₀ − σ·E_i` with unit exponential `E_i`. Integrating the locations
//! out gives `σ | X ~ InvGamma(nk + ν, C)` with
//! `C = kμ₀ + σ₀ + ΣΣ x_ij − (n + 1) Σ_i min(x_{i(1)}, μ₀)`, hence
//! `E[ln σ | X] = ln C − ψ(nk + ν)`.

use serde::{Deserialize, Serialize};

use super::{EstimateReport, EstimatorId};
use crate::error::{domain, Error, Result};
use crate::numerics::digamma;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesPrior {
    pub mu0: f64,
    pub sigma0: f64,
    pub nu: f64,
}

impl BayesPrior {
    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() || !(self.sigma0 > 0.0 && self.sigma0.is_finite()) || !(self.nu > 0.0 && self.nu.is_finite()) {
            return domain(format!(
                "prior needs finite mu0, sigma0 > 0 and nu > 0, got ({}, {}, {})",
                self.mu0, self.sigma0, self.nu
            ));
        }
        Ok(())
    }
}

/// Posterior mean of `ln σ` from `k` complete samples of equal size `n`.
pub fn bayes_squared_error(raw: &[Vec<f64>], prior: &BayesPrior) -> Result<EstimateReport> {
    prior.validate()?;
    let k = raw.len();
    if k < 2 {
        return Err(Error::Validation(format!("need at least 2 populations, got {k}")));
    }
    let n = raw[0].len();
    if n < 1 || raw.iter().any(|pop| pop.len() != n) {
        return Err(Error::Validation("populations must be non-empty and of equal size".into()));
    }
    if raw.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("data must be finite".into()));
    }
    let total: f64 = raw.iter().flatten().sum();
    let floor: f64 = raw
        .iter()
        .map(|pop| pop.iter().copied().fold(f64::INFINITY, f64::min).min(prior.mu0))
        .sum();
    let c = k as f64 * prior.mu0 + prior.sigma0 + total - (n as f64 + 1.0) * floor;
    if !(c > 0.0) {
        return domain(format!("posterior scale {c} is not positive"));
    }
    let theta_hat = c.ln() - digamma((n * k) as f64 + prior.nu)?;
    Ok(EstimateReport::new(EstimatorId::Bayes, theta_hat))
}
