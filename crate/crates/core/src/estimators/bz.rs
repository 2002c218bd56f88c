//! Smooth Brewster–Zidek type improvement `ln S + d(Z, 0)`.
//!
//! `d(z, 0)` minimizes the expected loss of `ln V + d` when `V` carries the
//! weight `w(v) = e^{-v} v^{m-1} ∏(1 − e^{-v z_i})`, i.e. it solves
//! `∫ L'(ln v + d) w(v) dv = 0`.

use serde::{Deserialize, Serialize};

use super::{check_match, EstimateReport, EstimatorId, SufficientStats};
use crate::error::{domain, Result};
use crate::losses::{LossConstants, LossKind, LossModel};
use crate::numerics::{digamma, gamma_expectation, ln_gamma_unchecked, solve_monotone_root_in, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BzMethod {
    /// Closed form for `k = 2` with a built-in loss, ratio of integrals for
    /// other `k`, root finding for custom losses.
    #[default]
    Auto,
    ClosedForm,
    /// Ratio of weighted gamma integrals (built-in losses only).
    Ratio,
    /// Root of the stationarity integral (any loss).
    Root,
}

/// Brewster–Zidek type estimate; falls back to `ln S + q0` unless all `Z_i > 0`.
pub fn brewster_zidek(
    stats: &SufficientStats,
    constants: &LossConstants,
    loss: &LossModel,
    quad: &QuadratureSpec,
    method: BzMethod,
) -> Result<EstimateReport> {
    check_match(stats, constants)?;
    let ln_s = stats.s.ln();
    if !stats.all_z_positive() {
        let mut report = EstimateReport::new(EstimatorId::Bz, ln_s + constants.q0);
        report.fallback_branch = true;
        return Ok(report);
    }
    let d = bz_offset(&stats.z(), constants, loss, quad, method)?;
    Ok(EstimateReport::new(EstimatorId::Bz, ln_s + d))
}

/// `d(z, 0)` for strictly positive `z`.
pub fn bz_offset(
    z: &[f64],
    constants: &LossConstants,
    loss: &LossModel,
    quad: &QuadratureSpec,
    method: BzMethod,
) -> Result<f64> {
    if z.len() != constants.k() {
        return domain(format!("z has {} entries, constants are for k = {}", z.len(), constants.k()));
    }
    if z.iter().any(|&zi| !(zi > 0.0)) {
        return domain("d(z, 0) needs every z_i > 0");
    }
    let m = constants.shape_m as f64;
    let built_in = !matches!(loss.kind(), LossKind::Custom);
    let method = match method {
        BzMethod::Auto if built_in && z.len() == 2 => BzMethod::ClosedForm,
        BzMethod::Auto if built_in => BzMethod::Ratio,
        BzMethod::Auto => BzMethod::Root,
        other => other,
    };
    match method {
        BzMethod::ClosedForm => {
            if z.len() != 2 {
                return domain("the closed form exists only for k = 2");
            }
            k2_offset(loss.kind(), m, z[0], z[1])
        }
        BzMethod::Ratio => ratio_offset(loss.kind(), m, z, quad),
        _ => root_offset(loss, constants, z, quad),
    }
}

/// `∏ (1 − e^{-v z_i})`, each factor divided by `min(z_i, 1)` so the product
/// stays of order one as `z → 0`.
fn product_weight(v: f64, z: &[f64]) -> f64 {
    z.iter()
        .map(|&zi| {
            let f = -(-v * zi).exp_m1();
            if zi < 1.0 {
                f / zi
            } else {
                f
            }
        })
        .product()
}

fn ratio_offset(kind: LossKind, m: f64, z: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    let mass = gamma_expectation(|v| product_weight(v, z), m, quad)?;
    match kind {
        LossKind::SquaredError => {
            let log_moment = gamma_expectation(|v| v.ln() * product_weight(v, z), m, quad)?;
            Ok(-log_moment / mass)
        }
        LossKind::Linex { a } => {
            if a <= -m {
                return domain(format!("linex a = {a} needs a > -{m}"));
            }
            let moment = gamma_expectation(|v| v.powf(a) * product_weight(v, z), m, quad)?;
            Ok(-(moment / mass).ln() / a)
        }
        LossKind::Custom => domain("the ratio form needs a squared error or linex loss"),
    }
}

fn root_offset(loss: &LossModel, constants: &LossConstants, z: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    let m = constants.shape_m as f64;
    let stationarity = |d: f64| gamma_expectation(|v| loss.deriv(v.ln() + d) * product_weight(v, z), m, quad);
    solve_monotone_root_in(stationarity, constants.p0 - 0.5, constants.q0 + 0.5)
}

/// Pieces of `A_m(z) = 1 − (1+z₁)^{-m} − (1+z₂)^{-m} + (1+z₁+z₂)^{-m}` and its
/// derivative in `m`, arranged without cancellation for small `z`.
fn k2_mass(m: f64, z1: f64, z2: f64) -> (f64, f64) {
    let l1 = z1.ln_1p();
    let l2 = z2.ln_1p();
    let l12 = (z1 + z2).ln_1p();
    let lc = (z1 * z2 / (1.0 + z1 + z2)).ln_1p();
    // A = u1·u2 − t, with u_i = 1 − (1+z_i)^{-m} and
    // t = (1+z₁+z₂)^{-m} [((1+z₁)(1+z₂)/(1+z₁+z₂))^{-m} − 1] ≤ 0
    let u1 = -(-m * l1).exp_m1();
    let u2 = -(-m * l2).exp_m1();
    let e12 = (-m * l12).exp();
    let t = e12 * (-m * lc).exp_m1();
    let a = u1 * u2 - t;
    let du1 = l1 * (1.0 - u1);
    let du2 = l2 * (1.0 - u2);
    let dt = -l12 * t - lc * e12 * (-m * lc).exp();
    (a, du1 * u2 + u1 * du2 - dt)
}

fn k2_offset(kind: LossKind, m: f64, z1: f64, z2: f64) -> Result<f64> {
    if !(z1 > 0.0 && z2 > 0.0) {
        return domain(format!("closed form needs z1, z2 > 0, got ({z1}, {z2})"));
    }
    match kind {
        LossKind::SquaredError => {
            // ∫ ln v w = Γ(m)(ψ(m)·A + ∂A/∂m)
            let (a, d) = k2_mass(m, z1, z2);
            Ok(-(digamma(m)? + d / a))
        }
        LossKind::Linex { a } => {
            if a <= -m {
                return domain(format!("linex a = {a} needs a > -{m}"));
            }
            let (mass_a, _) = k2_mass(m + a, z1, z2);
            let (mass, _) = k2_mass(m, z1, z2);
            let ln_ratio = ln_gamma_unchecked(m + a) - ln_gamma_unchecked(m) + (mass_a / mass).ln();
            Ok(-ln_ratio / a)
        }
        LossKind::Custom => domain("no closed form for a custom loss"),
    }
}

/// Closed-form `d(z, 0)` for two complete samples of size `n` (shape `2n − 2`).
pub fn bz_closed_form_k2(kind: LossKind, n: usize, z: [f64; 2]) -> Result<f64> {
    if n < 2 {
        return domain(format!("n must be >= 2, got {n}"));
    }
    k2_offset(kind, (2 * n - 2) as f64, z[0], z[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{compute_constants, linex_loss, squared_error_loss};

    const GRID: [f64; 5] = [0.1, 0.25, 0.5, 1.0, 2.0];

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    /// Direct evaluation of the k = 2 form; fine for moderate z.
    fn naive_squared_error(n: usize, z1: f64, z2: f64) -> f64 {
        let m = (2 * n - 2) as f64;
        let p = |z: f64| (1.0 + z).powf(-m);
        let a = 1.0 - p(z1) - p(z2) + p(z1 + z2);
        let d = (1.0 + z1).ln() * p(z1) + (1.0 + z2).ln() * p(z2) - (1.0 + z1 + z2).ln() * p(z1 + z2);
        -(digamma(m).unwrap() * a + d) / a
    }

    #[test]
    fn robust_closed_form_matches_direct_form() {
        for n in [4, 6] {
            for &z1 in &GRID {
                for &z2 in &GRID {
                    let got = bz_closed_form_k2(LossKind::SquaredError, n, [z1, z2]).unwrap();
                    assert!((got - naive_squared_error(n, z1, z2)).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn closed_forms_match_generic_root() {
        let losses = [squared_error_loss(), linex_loss(1.0).unwrap(), linex_loss(-2.0).unwrap()];
        for loss in &losses {
            for n in [4, 6] {
                let c = compute_constants(loss, 2, n, &quad()).unwrap();
                for &z1 in &GRID {
                    for &z2 in &GRID {
                        let closed = bz_closed_form_k2(loss.kind(), n, [z1, z2]).unwrap();
                        let root = bz_offset(&[z1, z2], &c, loss, &quad(), BzMethod::Root).unwrap();
                        let ratio = bz_offset(&[z1, z2], &c, loss, &quad(), BzMethod::Ratio).unwrap();
                        assert!((closed - root).abs() < 1e-8, "{loss:?} n={n} z=({z1},{z2}): {closed} vs {root}");
                        assert!((closed - ratio).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn example_point_lies_between_constants() {
        let loss = squared_error_loss();
        let c = compute_constants(&loss, 2, 4, &quad()).unwrap();
        let d = bz_offset(&[0.1, 0.1], &c, &loss, &quad(), BzMethod::Root).unwrap();
        let closed = bz_closed_form_k2(LossKind::SquaredError, 4, [0.1, 0.1]).unwrap();
        assert!((d - closed).abs() < 1e-7);
        assert!(c.p0 < d && d < c.q0);
    }

    #[test]
    fn limits_in_z() {
        for loss in [squared_error_loss(), linex_loss(1.0).unwrap()] {
            for (k, n) in [(2, 4), (3, 4), (2, 8)] {
                let c = compute_constants(&loss, k, n, &quad()).unwrap();
                for method in [BzMethod::Auto, BzMethod::Root] {
                    let lo = bz_offset(&vec![1e-6; k], &c, &loss, &quad(), method).unwrap();
                    let hi = bz_offset(&vec![1e3; k], &c, &loss, &quad(), method).unwrap();
                    assert!((lo - c.p0).abs() < 1e-4, "{lo} vs p0 {}", c.p0);
                    assert!((hi - c.q0).abs() < 1e-4, "{hi} vs q0 {}", c.q0);
                }
            }
        }
    }

    #[test]
    fn closed_form_is_stable_for_tiny_z() {
        let c = compute_constants(&squared_error_loss(), 2, 4, &quad()).unwrap();
        let d = bz_closed_form_k2(LossKind::SquaredError, 4, [1e-9, 1e-9]).unwrap();
        assert!((d - c.p0).abs() < 1e-7);
        let lc = compute_constants(&linex_loss(2.0).unwrap(), 2, 4, &quad()).unwrap();
        let d = bz_closed_form_k2(LossKind::Linex { a: 2.0 }, 4, [1e-9, 1e-9]).unwrap();
        assert!((d - lc.p0).abs() < 1e-7);
    }

    #[test]
    fn three_populations_ratio_matches_root() {
        let loss = squared_error_loss();
        let c = compute_constants(&loss, 3, 4, &quad()).unwrap();
        let z = [0.2, 0.7, 1.5];
        let a = bz_offset(&z, &c, &loss, &quad(), BzMethod::Ratio).unwrap();
        let b = bz_offset(&z, &c, &loss, &quad(), BzMethod::Root).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(c.p0 < a && a < c.q0);
        assert!(bz_offset(&z, &c, &loss, &quad(), BzMethod::ClosedForm).is_err());
    }

    #[test]
    fn custom_loss_uses_root() {
        let loss = LossModel::custom("t2+t4", |t: f64| t * t + t.powi(4), |t: f64| 2.0 * t + 4.0 * t.powi(3)).unwrap();
        let c = compute_constants(&loss, 2, 4, &quad()).unwrap();
        let d = bz_offset(&[0.3, 0.4], &c, &loss, &quad(), BzMethod::Auto).unwrap();
        assert!(c.p0 < d && d < c.q0);
        assert!(bz_offset(&[0.3, 0.4], &c, &loss, &quad(), BzMethod::Ratio).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(bz_closed_form_k2(LossKind::SquaredError, 4, [0.0, 1.0]).is_err());
        assert!(bz_closed_form_k2(LossKind::Linex { a: -6.0 }, 4, [1.0, 1.0]).is_err());
        assert!(bz_closed_form_k2(LossKind::Custom, 4, [1.0, 1.0]).is_err());
    }

    #[test]
    fn symmetric_in_z() {
        for &(z1, z2) in &[(0.1, 2.0), (0.25, 0.5), (1.0, 0.3)] {
            for kind in [LossKind::SquaredError, LossKind::Linex { a: 1.0 }] {
                let a = bz_closed_form_k2(kind, 6, [z1, z2]).unwrap();
                let b = bz_closed_form_k2(kind, 6, [z2, z1]).unwrap();
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fallback_when_some_z_nonpositive() {
        let loss = squared_error_loss();
        let c = compute_constants(&loss, 2, 4, &quad()).unwrap();
        let stats = SufficientStats::new(vec![-0.1, 0.4], 2.0, 4, 6, crate::sampling::SchemeKind::Iid).unwrap();
        let r = brewster_zidek(&stats, &c, &loss, &quad(), BzMethod::Auto).unwrap();
        assert!(r.fallback_branch);
        assert!((r.theta_hat - (2f64.ln() + c.q0)).abs() < 1e-15);
    }
}
