//! Integrals against the gamma weight `e^{-v} v^{shape-1}` on `(0, ∞)`.
//!
//! The substitution `v = e^y` turns every integrand used in this crate into a
//! smooth function on the real line that decays like `e^{shape·y}` on the left
//! and doubly exponentially on the right. The trapezoid rule on such functions
//! converges geometrically in the step size, including for the `ln v` factors
//! that defeat polynomial (Gauss–Laguerre) rules. Nodes are doubled until two
//! successive sums agree.

use serde::{Deserialize, Serialize};

use super::special::ln_gamma_unchecked;
use crate::error::{domain, Error, Result};

/// Log-density drop (in nats) below the peak at which the window may end.
const TAIL_NATS: f64 = 42.0;
/// Relative integrand magnitude treated as negligible at the window edge.
const TAIL_REL: f64 = 1e-18;
const WINDOW_STEP: f64 = 0.25;
const MAX_WINDOW_STEPS: usize = 8_000;

/// Tolerances and node budget for [`gamma_weighted_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Nodes in the first pass; doubled on each refinement.
    pub node_count: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_refinements: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            node_count: 64,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_refinements: 6,
        }
    }
}

impl QuadratureSpec {
    pub fn new(node_count: usize, abs_tol: f64, rel_tol: f64, max_refinements: u32) -> Result<Self> {
        let spec = Self {
            node_count,
            abs_tol,
            rel_tol,
            max_refinements,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 16 {
            return domain(format!("node_count must be >= 16, got {}", self.node_count));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return domain("quadrature tolerances must be positive");
        }
        if self.max_refinements == 0 {
            return domain("max_refinements must be positive");
        }
        Ok(())
    }

    fn accepts(&self, previous: f64, current: f64) -> bool {
        (current - previous).abs() <= self.abs_tol.max(self.rel_tol * current.abs())
    }
}

/// `∫₀^∞ f(v) e^{-v} v^{shape-1} dv`.
pub fn gamma_weighted_integral<F>(f: F, shape: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let scale = ln_gamma_checked(shape)?.exp();
    match gamma_expectation(f, shape, spec) {
        Ok(mean) => Ok(mean * scale),
        Err(Error::Accuracy { best, residual }) => Err(Error::Accuracy {
            best: best * scale,
            residual: residual * scale,
        }),
        Err(e) => Err(e),
    }
}

/// `E[f(V)]` for `V ~ Gamma(shape, 1)`; the normalized form of
/// [`gamma_weighted_integral`], safe for shapes whose `Γ` overflows.
pub fn gamma_expectation<F>(f: F, shape: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let ln_norm = ln_gamma_checked(shape)?;
    spec.validate()?;
    let integrand = |y: f64| {
        let v = y.exp();
        let log_density = shape * y - v - ln_norm;
        if log_density < -745.0 {
            0.0
        } else {
            f(v) * log_density.exp()
        }
    };

    let (lo, hi) = window(&integrand, shape, ln_norm)?;
    let mut nodes = spec.node_count;
    let mut h = (hi - lo) / (nodes - 1) as f64;
    let mut sum = 0.5 * (integrand(lo) + integrand(hi))
        + (1..nodes - 1).map(|j| integrand(lo + j as f64 * h)).sum::<f64>();
    let mut estimate = h * sum;
    if !estimate.is_finite() {
        return Err(Error::Domain(format!(
            "integrand is not finite against Gamma({shape}) weight"
        )));
    }

    let mut residual = f64::INFINITY;
    for _ in 0..spec.max_refinements {
        let midpoints: f64 = (0..nodes - 1)
            .map(|j| integrand(lo + (j as f64 + 0.5) * h))
            .sum();
        sum += midpoints;
        nodes = 2 * nodes - 1;
        h *= 0.5;
        let refined = h * sum;
        residual = (refined - estimate).abs();
        let converged = spec.accepts(estimate, refined);
        estimate = refined;
        if converged {
            return Ok(estimate);
        }
    }
    Err(Error::Accuracy {
        best: estimate,
        residual,
    })
}

fn ln_gamma_checked(shape: f64) -> Result<f64> {
    if !shape.is_finite() || shape <= 0.0 {
        return domain(format!("gamma weight needs a finite positive shape, got {shape}"));
    }
    Ok(ln_gamma_unchecked(shape))
}

/// Walks outward from the mode of the weight in `y = ln v` until both the
/// weight and the full integrand are negligible.
fn window<G: Fn(f64) -> f64>(integrand: &G, shape: f64, ln_norm: f64) -> Result<(f64, f64)> {
    let mode = shape.ln();
    let log_weight = |y: f64| shape * y - y.exp() - ln_norm;
    let peak = log_weight(mode);
    let mut scale = integrand(mode).abs();

    let mut edge = |direction: f64| -> Result<f64> {
        let mut y = mode;
        for _ in 0..MAX_WINDOW_STEPS {
            y += direction * WINDOW_STEP;
            let value = integrand(y).abs();
            if !value.is_finite() {
                return domain(format!("integrand is not finite at v = {}", y.exp()));
            }
            scale = scale.max(value);
            if log_weight(y) < peak - TAIL_NATS && value <= TAIL_REL * scale {
                return Ok(y);
            }
        }
        Err(Error::Accuracy {
            best: f64::NAN,
            residual: f64::INFINITY,
        })
    };
    let hi = edge(1.0)?;
    let lo = edge(-1.0)?;
    Ok((lo, hi))
}
