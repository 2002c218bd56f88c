//! Bowl-shaped location-invariant losses `L(t)` and the invariant-estimator
//! constants they induce.
//!
//! For a loss `L` and `V ~ Gamma(m, 1)` with `m` the gamma shape of `S/σ`:
//!
//! * `q0` minimizes `E L(ln V + c)`, i.e. solves `E L'(ln V + q0) = 0`;
//! * `p0` solves the same equation with `V` replaced by `Y ~ Gamma(m + k, 1)`.
//!
//! Squared error and linex losses have closed forms for both; they are used
//! and cross-checked against the numeric root.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{
    digamma, gamma_expectation, ln_gamma_unchecked, solve_monotone_root, QuadratureSpec,
};

/// Maximum disagreement tolerated between a closed form and its numeric root.
pub const CROSS_CHECK_TOL: f64 = 1e-8;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    Linex { a: f64 },
    Custom,
}

/// A loss `L(t)` together with its analytic derivative.
#[derive(Clone)]
pub struct LossModel {
    name: String,
    kind: LossKind,
    eval: ScalarFn,
    deriv: ScalarFn,
}

impl fmt::Debug for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossModel")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish()
    }
}

/// `L(t) = t²`.
pub fn squared_error_loss() -> LossModel {
    LossModel {
        name: "squared_error".to_string(),
        kind: LossKind::SquaredError,
        eval: Arc::new(|t| t * t),
        deriv: Arc::new(|t| 2.0 * t),
    }
}

/// `L(t) = e^{at} − at − 1`, `a ≠ 0`.
pub fn linex_loss(a: f64) -> Result<LossModel> {
    if a == 0.0 || !a.is_finite() {
        return domain(format!("linex parameter must be finite and nonzero, got {a}"));
    }
    Ok(LossModel {
        name: "linex".to_string(),
        kind: LossKind::Linex { a },
        eval: Arc::new(move |t| (a * t).exp_m1() - a * t),
        deriv: Arc::new(move |t| a * (a * t).exp_m1()),
    })
}

impl LossModel {
    /// A user-supplied loss. Its bowl shape is checked on a grid and its
    /// constants are always computed numerically.
    pub fn custom<E, D>(name: impl Into<String>, eval: E, deriv: D) -> Result<Self>
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let model = Self {
            name: name.into(),
            kind: LossKind::Custom,
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        };
        model.check_bowl_shape()?;
        Ok(model)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn linex_a(&self) -> Option<f64> {
        match self.kind {
            LossKind::Linex { a } => Some(a),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    #[inline]
    pub fn deriv(&self, t: f64) -> f64 {
        (self.deriv)(t)
    }

    /// Checks on `t ∈ [-8, 8]` that `L` is a strict bowl with minimum `L(0) = 0`
    /// and that `L'` has the matching signs.
    pub fn check_bowl_shape(&self) -> Result<()> {
        let grid: Vec<f64> = (-160..=160).map(|i| i as f64 * 0.05).collect();
        let at_zero = self.eval(0.0);
        if at_zero.abs() > 1e-12 {
            return domain(format!("{}: L(0) = {at_zero}, expected 0", self.name));
        }
        for pair in grid.windows(2) {
            let (t0, t1) = (pair[0], pair[1]);
            let (l0, l1) = (self.eval(t0), self.eval(t1));
            if !(l0.is_finite() && l1.is_finite()) || l0 < 0.0 {
                return domain(format!("{}: L must be finite and nonnegative (t = {t0})", self.name));
            }
            let ordered = if t1 <= 0.0 { l1 < l0 } else if t0 >= 0.0 { l1 > l0 } else { true };
            if !ordered {
                return domain(format!("{}: L is not a strict bowl between {t0} and {t1}", self.name));
            }
        }
        for &t in &grid {
            let d = self.deriv(t);
            if (t < 0.0 && d > 0.0) || (t > 0.0 && d < 0.0) || !d.is_finite() {
                return domain(format!("{}: L'({t}) = {d} has the wrong sign", self.name));
            }
        }
        Ok(())
    }
}

/// Invariant-estimator constants for one `(loss, k, shape)` configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    /// Offset of the minimum risk invariant estimator `ln S + q0`.
    pub q0: f64,
    /// Root of `E L'(ln Y + p0) = 0`, `Y ~ Gamma(shape_kn, 1)`.
    pub p0: f64,
    /// Gamma shape of `S/σ`.
    pub shape_m: usize,
    /// `shape_m + k`, the shape of the conditional scale variable given `Z`.
    pub shape_kn: usize,
    /// Whether `q0`/`p0` come from closed forms (cross-checked) or only the root finder.
    pub closed_form: bool,
}

impl LossConstants {
    /// Number of populations implied by the two shapes.
    pub fn k(&self) -> usize {
        self.shape_kn - self.shape_m
    }
}

/// `E L'(ln V + c)` for `V ~ Gamma(shape, 1)`.
pub fn stationarity_residual(loss: &LossModel, shape: f64, c: f64, quad: &QuadratureSpec) -> Result<f64> {
    gamma_expectation(|v| loss.deriv(v.ln() + c), shape, quad)
}

/// Numerically solves `E L'(ln V + c) = 0` for `V ~ Gamma(shape, 1)`.
pub fn numeric_offset(loss: &LossModel, shape: f64, quad: &QuadratureSpec) -> Result<f64> {
    // the root sits near -E ln V = -ψ(shape)
    let seed = -digamma(shape)?;
    solve_monotone_root(|c| stationarity_residual(loss, shape, c, quad), seed)
}

/// Closed-form offset for the built-in losses, `None` for custom ones.
pub fn closed_form_offset(loss: &LossModel, shape: f64) -> Result<Option<f64>> {
    match loss.kind() {
        LossKind::SquaredError => Ok(Some(-digamma(shape)?)),
        LossKind::Linex { a } => {
            if a <= -shape {
                return domain(format!(
                    "linex a = {a} needs a > -{shape}: E[V^a] diverges for Gamma({shape})"
                ));
            }
            Ok(Some((ln_gamma_unchecked(shape) - ln_gamma_unchecked(shape + a)) / a))
        }
        LossKind::Custom => Ok(None),
    }
}

/// Constants for `k` populations of `n` complete observations each
/// (`shape_m = k(n − 1)`).
pub fn compute_constants(loss: &LossModel, k: usize, n: usize, quad: &QuadratureSpec) -> Result<LossConstants> {
    if k < 2 || n < 2 {
        return domain(format!("need k >= 2 and n >= 2, got k = {k}, n = {n}"));
    }
    compute_constants_for_shape(loss, k, k * (n - 1), quad)
}

/// Constants for an arbitrary gamma shape of `S/σ` (censored schemes).
pub fn compute_constants_for_shape(
    loss: &LossModel,
    k: usize,
    shape_m: usize,
    quad: &QuadratureSpec,
) -> Result<LossConstants> {
    if k < 2 || shape_m == 0 {
        return domain(format!("need k >= 2 and a positive shape, got k = {k}, shape = {shape_m}"));
    }
    let shape_kn = shape_m + k;
    let (q0, p0, closed_form) = match (
        closed_form_offset(loss, shape_m as f64)?,
        closed_form_offset(loss, shape_kn as f64)?,
    ) {
        (Some(q0), Some(p0)) => {
            cross_check("q0", q0, numeric_offset(loss, shape_m as f64, quad)?)?;
            cross_check("p0", p0, numeric_offset(loss, shape_kn as f64, quad)?)?;
            (q0, p0, true)
        }
        _ => (
            numeric_offset(loss, shape_m as f64, quad)?,
            numeric_offset(loss, shape_kn as f64, quad)?,
            false,
        ),
    };
    if p0 >= q0 {
        return Err(Error::Contract(format!(
            "{}: p0 = {p0} is not below q0 = {q0}",
            loss.name()
        )));
    }
    Ok(LossConstants {
        q0,
        p0,
        shape_m,
        shape_kn,
        closed_form,
    })
}

fn cross_check(what: &str, closed: f64, numeric: f64) -> Result<()> {
    if (closed - numeric).abs() > CROSS_CHECK_TOL {
        return Err(Error::CrossCheck {
            what: what.to_string(),
            closed,
            numeric,
        });
    }
    Ok(())
}

/// `E L'(ln V + p0)` with `V ~ Gamma(shape_m, 1)`. Strictly negative values
/// confirm the condition under which the Stein-type estimator improves on
/// the invariant one.
pub fn check_dominance_condition(
    loss: &LossModel,
    constants: &LossConstants,
    quad: &QuadratureSpec,
) -> Result<f64> {
    stationarity_residual(loss, constants.shape_m as f64, constants.p0, quad)
}
