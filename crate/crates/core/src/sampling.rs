//! Data generation under the four sampling schemes and reduction of raw
//! samples to the sufficient statistic `(X, S)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimators::SufficientStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Complete i.i.d. samples.
    Iid,
    /// First `n` upper record values of an i.i.d. sequence.
    Record,
    /// Smallest `r` of `n_total` lifetimes.
    Type2,
    /// Progressive Type-II censoring with removal plan `R_1..R_n`.
    Progressive2,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::Iid => "iid",
            SchemeKind::Record => "record",
            SchemeKind::Type2 => "type2",
            SchemeKind::Progressive2 => "progressive2",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iid" => Ok(SchemeKind::Iid),
            "record" | "records" => Ok(SchemeKind::Record),
            "type2" | "type-ii" | "type_ii" => Ok(SchemeKind::Type2),
            "progressive2" | "progressive" | "progressive-type-ii" => Ok(SchemeKind::Progressive2),
            other => domain(format!("unknown sampling scheme '{other}'")),
        }
    }
}

/// Sampling design for `k` populations.
///
/// `n` is the number of observed values per population. For Type-II it equals
/// `r`; for progressive censoring it equals the length of `removals` and
/// `n_total = n + Σ R_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub k: usize,
    pub n: usize,
    pub r: Option<usize>,
    pub n_total: Option<usize>,
    pub removals: Option<Vec<usize>>,
}

impl SchemeConfig {
    pub fn iid(k: usize, n: usize) -> Result<Self> {
        Self::checked(SchemeConfig {
            kind: SchemeKind::Iid,
            k,
            n,
            r: None,
            n_total: None,
            removals: None,
        })
    }

    pub fn record(k: usize, n: usize) -> Result<Self> {
        Self::checked(SchemeConfig {
            kind: SchemeKind::Record,
            k,
            n,
            r: None,
            n_total: None,
            removals: None,
        })
    }

    pub fn type2(k: usize, r: usize, n_total: usize) -> Result<Self> {
        Self::checked(SchemeConfig {
            kind: SchemeKind::Type2,
            k,
            n: r,
            r: Some(r),
            n_total: Some(n_total),
            removals: None,
        })
    }

    pub fn progressive2(k: usize, removals: Vec<usize>) -> Result<Self> {
        let n = removals.len();
        let n_total = n + removals.iter().sum::<usize>();
        Self::checked(SchemeConfig {
            kind: SchemeKind::Progressive2,
            k,
            n,
            r: None,
            n_total: Some(n_total),
            removals: Some(removals),
        })
    }

    fn checked(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return domain(format!("k must be >= 2, got {}", self.k));
        }
        if self.n < 2 {
            return domain(format!("n must be >= 2, got {}", self.n));
        }
        match self.kind {
            SchemeKind::Iid | SchemeKind::Record => {}
            SchemeKind::Type2 => {
                let (Some(r), Some(total)) = (self.r, self.n_total) else {
                    return domain("type2 needs both r and n_total");
                };
                if r != self.n || r < 2 || r > total {
                    return domain(format!("type2 needs 2 <= r <= n_total and n = r, got r = {r}, n = {}, n_total = {total}", self.n));
                }
            }
            SchemeKind::Progressive2 => {
                let Some(removals) = &self.removals else {
                    return domain("progressive2 needs a removal plan");
                };
                let total = self.n_total.unwrap_or(0);
                if removals.len() != self.n || self.n + removals.iter().sum::<usize>() != total {
                    return domain(format!(
                        "progressive2 needs n + sum(removals) = n_total with one removal per failure (n = {}, removals = {removals:?}, n_total = {total})",
                        self.n
                    ));
                }
            }
        }
        Ok(())
    }

    /// Gamma shape of `S/σ`.
    pub fn shape_m(&self) -> usize {
        match self.kind {
            SchemeKind::Type2 => self.k * (self.r.unwrap_or(self.n) - 1),
            _ => self.k * (self.n - 1),
        }
    }

    /// Number of units on test per population, which scales the minimum in `X_i`.
    fn units_on_test(&self) -> usize {
        match self.kind {
            SchemeKind::Iid | SchemeKind::Record => self.n,
            SchemeKind::Type2 | SchemeKind::Progressive2 => self.n_total.unwrap_or(self.n),
        }
    }
}

/// Unit exponential by inversion; `u ∈ [0, 1)` keeps the log finite.
#[inline]
pub fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    -(-u).ln_1p()
}

/// Draws one dataset: `k` vectors of observed values from `E(θ_i, σ)`.
pub fn generate<R: Rng + ?Sized>(
    scheme: &SchemeConfig,
    theta: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    scheme.validate()?;
    if theta.len() != scheme.k {
        return domain(format!("theta has {} entries, scheme has k = {}", theta.len(), scheme.k));
    }
    if !(sigma > 0.0 && sigma.is_finite()) || theta.iter().any(|t| !t.is_finite()) {
        return domain(format!("need finite theta and sigma > 0, got sigma = {sigma}"));
    }
    Ok(theta
        .iter()
        .map(|&loc| {
            let unit = draw_unit(scheme, rng);
            unit.into_iter().map(|e| loc + sigma * e).collect()
        })
        .collect())
}

/// [`generate`] with a generator seeded from `seed`.
pub fn generate_seeded(scheme: &SchemeConfig, theta: &[f64], sigma: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate(scheme, theta, sigma, &mut rng)
}

/// One population's observations at `θ = 0`, `σ = 1`.
fn draw_unit<R: Rng + ?Sized>(scheme: &SchemeConfig, rng: &mut R) -> Vec<f64> {
    match scheme.kind {
        SchemeKind::Iid => (0..scheme.n).map(|_| standard_exponential(rng)).collect(),
        SchemeKind::Record => {
            // by memorylessness the excess over the current record is a fresh exponential
            let mut current = 0.0;
            (0..scheme.n)
                .map(|_| {
                    current += standard_exponential(rng);
                    current
                })
                .collect()
        }
        SchemeKind::Type2 => {
            let mut all = sorted_lifetimes(scheme.n_total.unwrap_or(scheme.n), rng);
            all.truncate(scheme.n);
            all
        }
        SchemeKind::Progressive2 => {
            let mut alive = sorted_lifetimes(scheme.n_total.unwrap_or(scheme.n), rng);
            let removals = scheme.removals.as_deref().unwrap_or(&[]);
            let mut observed = Vec::with_capacity(scheme.n);
            for &r_j in removals {
                observed.push(alive.remove(0));
                for _ in 0..r_j.min(alive.len()) {
                    let idx = rng.gen_range(0..alive.len());
                    alive.remove(idx);
                }
            }
            observed
        }
    }
}

fn sorted_lifetimes<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..count).map(|_| standard_exponential(rng)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Reduces raw observations to `(X, S)` for the declared scheme.
pub fn reduce(scheme: &SchemeConfig, raw: &[Vec<f64>]) -> Result<SufficientStats> {
    scheme.validate()?;
    if raw.len() != scheme.k {
        return Err(Error::Validation(format!(
            "expected {} populations, found {}",
            scheme.k,
            raw.len()
        )));
    }
    for (i, pop) in raw.iter().enumerate() {
        if pop.len() != scheme.n {
            return Err(Error::Validation(format!(
                "population {} has {} values, scheme expects {}",
                i + 1,
                pop.len(),
                scheme.n
            )));
        }
        if let Some(bad) = pop.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("population {} contains non-finite value {bad}", i + 1)));
        }
        if scheme.kind != SchemeKind::Iid && pop.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation(format!(
                "population {} is not in increasing order as the {} scheme requires",
                i + 1,
                scheme.kind
            )));
        }
    }

    let units = scheme.units_on_test() as f64;
    let mut x = Vec::with_capacity(scheme.k);
    let mut s = 0.0;
    for pop in raw {
        let first = match scheme.kind {
            SchemeKind::Iid => pop.iter().copied().fold(f64::INFINITY, f64::min),
            _ => pop[0],
        };
        let spacing = match scheme.kind {
            SchemeKind::Iid => pop.iter().map(|v| v - first).sum::<f64>(),
            SchemeKind::Record => pop[scheme.n - 1] - first,
            SchemeKind::Type2 => {
                let tail = (scheme.n_total.unwrap_or(scheme.n) - scheme.n) as f64;
                pop.iter().map(|v| v - first).sum::<f64>() + tail * (pop[scheme.n - 1] - first)
            }
            SchemeKind::Progressive2 => {
                let removals = scheme.removals.as_deref().unwrap_or(&[]);
                pop.iter()
                    .zip(removals)
                    .map(|(v, &r)| (r as f64 + 1.0) * (v - first))
                    .sum::<f64>()
            }
        };
        x.push(match scheme.kind {
            SchemeKind::Record => first,
            _ => units * first,
        });
        s += spacing;
    }
    if !(s > 0.0) {
        return Err(Error::Validation(format!(
            "pooled spacing S = {s} must be positive (all observations tied?)"
        )));
    }
    SufficientStats::new(x, s, scheme.n, scheme.shape_m(), scheme.kind)
}
