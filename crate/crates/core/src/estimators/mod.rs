//! Estimators of `θ = ln σ` and the entropy transforms built on them.
//!
//! All estimators except the Bayes rule are functions of the sufficient
//! statistic `(X, S)` and have the form `ln S + ζ(Z)` with `Z = X / S`.

mod bayes;
mod bz;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::losses::{LossConstants, LossModel};
use crate::numerics::QuadratureSpec;
use crate::sampling::SchemeKind;

pub use bayes::{bayes_squared_error, BayesPrior};
pub use bz::{brewster_zidek, bz_closed_form_k2, bz_offset, BzMethod};

/// The complete sufficient statistic `(X, S)` plus the shape bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    /// Scaled per-population minima (data units).
    pub x: Vec<f64>,
    /// Pooled spacings; `S/σ ~ Gamma(shape_m, 1)`.
    pub s: f64,
    pub k: usize,
    pub n: usize,
    pub shape_m: usize,
    pub scheme: SchemeKind,
}

impl SufficientStats {
    pub fn new(x: Vec<f64>, s: f64, n: usize, shape_m: usize, scheme: SchemeKind) -> Result<Self> {
        let stats = Self {
            k: x.len(),
            x,
            s,
            n,
            shape_m,
            scheme,
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.x.len() != self.k {
            return domain(format!("need k >= 2 minima, got {}", self.x.len()));
        }
        if self.n < 2 || self.shape_m == 0 {
            return domain(format!("need n >= 2 and shape_m >= 1, got n = {}, shape_m = {}", self.n, self.shape_m));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return domain(format!("S must be finite and positive, got {}", self.s));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return domain("X must be finite");
        }
        Ok(())
    }

    /// `Z_i = X_i / S`.
    pub fn z(&self) -> Vec<f64> {
        self.x.iter().map(|xi| xi / self.s).collect()
    }

    /// Whether every `Z_i` is strictly positive, the precondition of the
    /// improved branches.
    pub fn all_z_positive(&self) -> bool {
        self.x.iter().all(|&xi| xi > 0.0)
    }

    /// Statistics of the data rescaled by `a > 0`.
    pub fn rescaled(&self, a: f64) -> Self {
        Self {
            x: self.x.iter().map(|v| v * a).collect(),
            s: self.s * a,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorId {
    Mrie,
    Stein,
    Bz,
    Bayes,
}

impl EstimatorId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::Mrie => "mrie",
            EstimatorId::Stein => "stein",
            EstimatorId::Bz => "bz",
            EstimatorId::Bayes => "bayes",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mrie" | "t0" => Ok(EstimatorId::Mrie),
            "stein" => Ok(EstimatorId::Stein),
            "bz" | "brewster_zidek" | "brewster-zidek" => Ok(EstimatorId::Bz),
            "bayes" => Ok(EstimatorId::Bayes),
            other => domain(format!("unknown estimator '{other}'")),
        }
    }
}

/// One point estimate with its entropy transforms and branch flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: EstimatorId,
    pub theta_hat: f64,
    pub shannon: f64,
    /// `(α, Rényi entropy)` when requested.
    pub renyi: Option<(f64, f64)>,
    /// Stein branch chose `q0`.
    pub clipped: bool,
    /// Some `Z_i ≤ 0`, so the invariant estimator was returned.
    pub fallback_branch: bool,
}

impl EstimateReport {
    pub fn new(estimator: EstimatorId, theta_hat: f64) -> Self {
        Self {
            estimator,
            theta_hat,
            shannon: theta_hat + 1.0,
            renyi: None,
            clipped: false,
            fallback_branch: false,
        }
    }

    pub fn with_renyi(mut self, alpha: f64) -> Result<Self> {
        let (_, renyi) = entropy_from_theta(self.theta_hat, Some(alpha))?;
        self.renyi = renyi.map(|r| (alpha, r));
        Ok(self)
    }
}

/// Shannon entropy `1 + θ` and, for `α ≥ 0, α ≠ 1`, Rényi entropy
/// `θ − ln α / (1 − α)` of an exponential law with scale `e^θ`.
pub fn entropy_from_theta(theta_hat: f64, alpha: Option<f64>) -> Result<(f64, Option<f64>)> {
    let shannon = 1.0 + theta_hat;
    let renyi = match alpha {
        None => None,
        Some(a) if a == 1.0 => return domain("Renyi order alpha = 1 is the Shannon limit; use the Shannon entropy"),
        Some(a) if !(a >= 0.0) || !a.is_finite() => return domain(format!("Renyi order must be >= 0, got {a}")),
        Some(a) => Some(theta_hat - a.ln() / (1.0 - a)),
    };
    Ok((shannon, renyi))
}

fn check_match(stats: &SufficientStats, constants: &LossConstants) -> Result<()> {
    stats.validate()?;
    if stats.shape_m != constants.shape_m || stats.k != constants.k() {
        return Err(Error::Contract(format!(
            "constants computed for k = {}, shape {} but data has k = {}, shape {}",
            constants.k(),
            constants.shape_m,
            stats.k,
            stats.shape_m
        )));
    }
    Ok(())
}

/// Minimum risk invariant estimator `ln S + q0`.
pub fn mrie(stats: &SufficientStats, constants: &LossConstants) -> Result<EstimateReport> {
    check_match(stats, constants)?;
    Ok(EstimateReport::new(EstimatorId::Mrie, stats.s.ln() + constants.q0))
}

/// Stein-type estimator `ln S + min{q0, p0 + ln(1 + ΣZ_i)}` when all `Z_i > 0`.
pub fn stein(stats: &SufficientStats, constants: &LossConstants) -> Result<EstimateReport> {
    check_match(stats, constants)?;
    let ln_s = stats.s.ln();
    if !stats.all_z_positive() {
        let mut report = EstimateReport::new(EstimatorId::Stein, ln_s + constants.q0);
        report.fallback_branch = true;
        return Ok(report);
    }
    let z_sum: f64 = stats.x.iter().sum::<f64>() / stats.s;
    let candidate = constants.p0 + z_sum.ln_1p();
    let clipped = candidate >= constants.q0;
    let mut report = EstimateReport::new(
        EstimatorId::Stein,
        ln_s + if clipped { constants.q0 } else { candidate },
    );
    report.clipped = clipped;
    Ok(report)
}

/// A rule mapping sufficient statistics to an estimate of `ln σ`.
pub trait PointEstimator: Send + Sync {
    fn label(&self) -> String;
    fn estimate(&self, stats: &SufficientStats) -> Result<f64>;
}

/// The equivariant estimators sharing one loss and its constants.
#[derive(Debug, Clone)]
pub struct EstimatorSuite {
    pub loss: LossModel,
    pub constants: LossConstants,
    pub quad: QuadratureSpec,
    pub bz_method: BzMethod,
}

impl EstimatorSuite {
    pub fn new(loss: LossModel, constants: LossConstants, quad: QuadratureSpec) -> Self {
        Self {
            loss,
            constants,
            quad,
            bz_method: BzMethod::Auto,
        }
    }

    pub fn report(&self, id: EstimatorId, stats: &SufficientStats) -> Result<EstimateReport> {
        match id {
            EstimatorId::Mrie => mrie(stats, &self.constants),
            EstimatorId::Stein => stein(stats, &self.constants),
            EstimatorId::Bz => brewster_zidek(stats, &self.constants, &self.loss, &self.quad, self.bz_method),
            EstimatorId::Bayes => Err(Error::Contract(
                "the Bayes rule needs raw data and prior hyperparameters; use bayes_squared_error".into(),
            )),
        }
    }

    /// A [`PointEstimator`] view of one member of the suite.
    pub fn member(&self, id: EstimatorId) -> SuiteMember<'_> {
        SuiteMember { suite: self, id }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteMember<'a> {
    suite: &'a EstimatorSuite,
    id: EstimatorId,
}

impl PointEstimator for SuiteMember<'_> {
    fn label(&self) -> String {
        self.id.to_string()
    }

    fn estimate(&self, stats: &SufficientStats) -> Result<f64> {
        self.suite.report(self.id, stats).map(|r| r.theta_hat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{compute_constants, linex_loss, squared_error_loss};

    fn stats(x: Vec<f64>, s: f64) -> SufficientStats {
        SufficientStats::new(x, s, 4, 6, SchemeKind::Iid).unwrap()
    }

    fn se_constants() -> LossConstants {
        compute_constants(&squared_error_loss(), 2, 4, &QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn mrie_examples() {
        let c = se_constants();
        let r = mrie(&stats(vec![0.3, 0.2], 1.0), &c).unwrap();
        assert!((r.theta_hat + 1.706_117_7).abs() < 1e-7);
        assert_eq!(r.shannon, r.theta_hat + 1.0);
        let e = std::f64::consts::E;
        let r2 = mrie(&stats(vec![0.3, 0.2], e), &c).unwrap();
        assert!((r2.theta_hat - r.theta_hat - 1.0).abs() < 1e-15);

        let lc = compute_constants(&linex_loss(1.0).unwrap(), 2, 4, &QuadratureSpec::default()).unwrap();
        assert!(mrie(&stats(vec![1.0, 1.0], 6.0), &lc).unwrap().theta_hat.abs() < 1e-12);
    }

    #[test]
    fn mismatched_constants_are_a_contract_error() {
        let c = compute_constants(&squared_error_loss(), 2, 6, &QuadratureSpec::default()).unwrap();
        assert!(matches!(mrie(&stats(vec![1.0, 1.0], 1.0), &c), Err(Error::Contract(_))));
        let c3 = compute_constants(&squared_error_loss(), 3, 4, &QuadratureSpec::default()).unwrap();
        let s3 = SufficientStats::new(vec![1.0, 1.0], 1.0, 4, 9, SchemeKind::Iid).unwrap();
        assert!(matches!(stein(&s3, &c3), Err(Error::Contract(_))));
    }

    #[test]
    fn stein_examples() {
        let c = se_constants();
        let r = stein(&stats(vec![0.05, 0.05], 1.0), &c).unwrap();
        assert!((r.theta_hat + 1.920_331_3).abs() < 1e-7);
        assert!(!r.clipped && !r.fallback_branch);

        let r = stein(&stats(vec![0.5, 0.3], 1.0), &c).unwrap();
        assert!((r.theta_hat + 1.706_117_7).abs() < 1e-7);
        assert!(r.clipped);

        let s = stats(vec![0.5, -0.3], 2.5);
        let r = stein(&s, &c).unwrap();
        assert!(r.fallback_branch);
        assert_eq!(r.theta_hat, mrie(&s, &c).unwrap().theta_hat);
        let s = stats(vec![0.0, 0.3], 2.5);
        assert!(stein(&s, &c).unwrap().fallback_branch);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_from_theta(0.0, None).unwrap(), (1.0, None));
        assert_eq!(entropy_from_theta(1.5, None).unwrap().0, 2.5);
        let (_, r) = entropy_from_theta(0.0, Some(2.0)).unwrap();
        assert!((r.unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(entropy_from_theta(0.0, Some(1.0)).is_err());
        assert!(entropy_from_theta(0.0, Some(-0.5)).is_err());
        assert_eq!(entropy_from_theta(0.0, Some(0.0)).unwrap().1, Some(f64::INFINITY));
        let rep = EstimateReport::new(EstimatorId::Mrie, 0.25).with_renyi(0.5).unwrap();
        assert!((rep.renyi.unwrap().1 - (0.25 + 2.0 * std::f64::consts::LN_2)).abs() < 1e-15);
    }

    #[test]
    fn estimator_ids_parse() {
        for id in [EstimatorId::Mrie, EstimatorId::Stein, EstimatorId::Bz, EstimatorId::Bayes] {
            assert_eq!(id.as_str().parse::<EstimatorId>().unwrap(), id);
        }
        assert!("james-stein".parse::<EstimatorId>().is_err());
    }

    #[test]
    fn stats_validation() {
        assert!(SufficientStats::new(vec![1.0], 1.0, 4, 3, SchemeKind::Iid).is_err());
        assert!(SufficientStats::new(vec![1.0, 2.0], 0.0, 4, 6, SchemeKind::Iid).is_err());
        assert!(SufficientStats::new(vec![1.0, f64::NAN], 1.0, 4, 6, SchemeKind::Iid).is_err());
        let s = stats(vec![1.0, 2.0], 4.0);
        assert_eq!(s.z(), vec![0.25, 0.5]);
        assert_eq!(s.rescaled(2.0).z(), s.z());
    }

    #[test]
    fn suite_rejects_bayes() {
        let suite = EstimatorSuite::new(squared_error_loss(), se_constants(), QuadratureSpec::default());
        assert!(suite.report(EstimatorId::Bayes, &stats(vec![1.0, 1.0], 1.0)).is_err());
        let member = suite.member(EstimatorId::Stein);
        assert_eq!(member.label(), "stein");
        assert!(member.estimate(&stats(vec![1.0, 1.0], 1.0)).is_ok());
    }
}
