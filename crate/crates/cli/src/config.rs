//! Flat TOML run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use expo_entropy::estimators::{BayesPrior, EstimatorId};
use expo_entropy::losses::{linex_loss, squared_error_loss, LossModel};
use expo_entropy::sampling::{SchemeConfig, SchemeKind};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// `n = 4` or `n = [4, 6, 8]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SampleSizes {
    One(usize),
    Many(Vec<usize>),
}

impl SampleSizes {
    pub fn values(&self) -> Vec<usize> {
        match self {
            SampleSizes::One(n) => vec![*n],
            SampleSizes::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: String,
    pub k: usize,
    pub n: Option<SampleSizes>,
    pub r: Option<usize>,
    pub n_total: Option<usize>,
    pub removals: Option<Vec<usize>>,
    #[serde(default = "default_loss")]
    pub loss: String,
    pub linex_a: Option<f64>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    pub mu0: Option<f64>,
    pub sigma0: Option<f64>,
    pub nu: Option<f64>,
    pub alpha: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub theta_grid: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub common_random_numbers: bool,
    pub input: Option<Vec<PathBuf>>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

fn default_loss() -> String {
    "squared_error".into()
}

fn default_estimators() -> Vec<String> {
    vec!["mrie".into(), "stein".into(), "bz".into()]
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn scheme_kind(&self) -> Result<SchemeKind> {
        Ok(self.scheme.parse::<SchemeKind>()?)
    }

    /// Sample sizes to run; Type-II takes `r` and progressive censoring takes the
    /// removal plan length when `n` is absent.
    pub fn sample_sizes(&self) -> Result<Vec<usize>> {
        if let Some(n) = &self.n {
            let v = n.values();
            if v.is_empty() {
                bail!("n must not be empty");
            }
            return Ok(v);
        }
        match self.scheme_kind()? {
            SchemeKind::Type2 => Ok(vec![self.r.context("type2 config needs r")?]),
            SchemeKind::Progressive2 => Ok(vec![self.removals.as_ref().context("progressive2 config needs removals")?.len()]),
            _ => bail!("config needs n"),
        }
    }

    /// Scheme for sample size `n`.
    pub fn scheme_for(&self, n: usize) -> Result<SchemeConfig> {
        let scheme = match self.scheme_kind()? {
            SchemeKind::Iid => SchemeConfig::iid(self.k, n)?,
            SchemeKind::Record => SchemeConfig::record(self.k, n)?,
            SchemeKind::Type2 => {
                let r = self.r.unwrap_or(n);
                if r != n {
                    bail!("type2: n ({n}) and r ({r}) disagree");
                }
                SchemeConfig::type2(self.k, r, self.n_total.context("type2 config needs n_total")?)?
            }
            SchemeKind::Progressive2 => {
                let removals = self.removals.clone().context("progressive2 config needs removals")?;
                let scheme = SchemeConfig::progressive2(self.k, removals)?;
                if scheme.n != n {
                    bail!("progressive2: n ({n}) differs from the number of removals ({})", scheme.n);
                }
                if let Some(total) = self.n_total {
                    if total != scheme.n_total.unwrap_or(0) {
                        bail!("progressive2: n_total = {total} but n + sum(removals) = {}", scheme.n_total.unwrap_or(0));
                    }
                }
                scheme
            }
        };
        Ok(scheme)
    }

    /// The single scheme of an `estimate` run.
    pub fn single_scheme(&self) -> Result<SchemeConfig> {
        match self.sample_sizes()?.as_slice() {
            [n] => self.scheme_for(*n),
            many => bail!("estimate needs a single n, config lists {many:?}"),
        }
    }

    pub fn loss_model(&self) -> Result<LossModel> {
        match self.loss.trim().to_ascii_lowercase().as_str() {
            "squared_error" | "squared-error" | "squared" => {
                if self.linex_a.is_some() {
                    bail!("linex_a given with squared error loss");
                }
                Ok(squared_error_loss())
            }
            "linex" => Ok(linex_loss(self.linex_a.context("linex loss needs linex_a")?)?),
            other => bail!("unknown loss '{other}' (expected squared_error or linex)"),
        }
    }

    pub fn estimator_ids(&self) -> Result<Vec<EstimatorId>> {
        if self.estimators.is_empty() {
            bail!("estimators must not be empty");
        }
        self.estimators
            .iter()
            .map(|s| s.parse::<EstimatorId>().map_err(Into::into))
            .collect()
    }

    pub fn bayes_prior(&self) -> Result<BayesPrior> {
        let prior = BayesPrior {
            mu0: self.mu0.context("bayes needs mu0")?,
            sigma0: self.sigma0.context("bayes needs sigma0")?,
            nu: self.nu.context("bayes needs nu")?,
        };
        prior.validate()?;
        Ok(prior)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalar_and_list_n() {
        let c = RunConfig::from_toml("scheme = \"iid\"\nk = 2\nn = 4\n").unwrap();
        assert_eq!(c.sample_sizes().unwrap(), vec![4]);
        assert_eq!(c.estimator_ids().unwrap().len(), 3);
        let c = RunConfig::from_toml("scheme = \"record\"\nk = 2\nn = [4, 6, 8]\n").unwrap();
        assert_eq!(c.sample_sizes().unwrap(), vec![4, 6, 8]);
        assert!(c.single_scheme().is_err());
    }

    #[test]
    fn scheme_fields_are_required() {
        assert!(RunConfig::from_toml("k = 2\nn = 4\n").is_err());
        assert!(RunConfig::from_toml("scheme = \"iid\"\nn = 4\n").is_err());
        let c = RunConfig::from_toml("scheme = \"iid\"\nk = 2\n").unwrap();
        assert!(c.sample_sizes().is_err());
        assert!(RunConfig::from_toml("scheme = \"iid\"\nk = 2\nn = 4\nbogus = 1\n").is_err());
    }

    #[test]
    fn censored_schemes() {
        let c = RunConfig::from_toml("scheme = \"type2\"\nk = 2\nr = 3\nn_total = 6\n").unwrap();
        assert_eq!(c.single_scheme().unwrap().shape_m(), 4);
        let c = RunConfig::from_toml("scheme = \"progressive2\"\nk = 2\nremovals = [1, 0, 2]\n").unwrap();
        assert_eq!(c.single_scheme().unwrap().n_total, Some(6));
        let c = RunConfig::from_toml("scheme = \"progressive2\"\nk = 2\nremovals = [1, 0, 2]\nn_total = 7\n").unwrap();
        assert!(c.single_scheme().is_err());
    }

    #[test]
    fn losses() {
        let c = RunConfig::from_toml("scheme = \"iid\"\nk = 2\nn = 4\nloss = \"linex\"\nlinex_a = 1.0\n").unwrap();
        assert_eq!(c.loss_model().unwrap().linex_a(), Some(1.0));
        let c = RunConfig::from_toml("scheme = \"iid\"\nk = 2\nn = 4\nloss = \"linex\"\n").unwrap();
        assert!(c.loss_model().is_err());
        let c = RunConfig::from_toml("scheme = \"iid\"\nk = 2\nn = 4\nloss = \"absolute\"\n").unwrap();
        assert!(c.loss_model().is_err());
    }
}
