//! Seeded, parallel Monte Carlo risks and percentage risk improvements.
//!
//! Replication `b` of cell `c` draws from its own generator seeded by a
//! SplitMix64 hash of `(master_seed, c, b)`. Replications are reduced in
//! fixed-size chunks whose partial sums are merged in index order, so tables
//! are bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimators::{BzMethod, EstimatorId, EstimatorSuite, PointEstimator, SuiteMember};
use crate::losses::{compute_constants_for_shape, LossModel};
use crate::numerics::QuadratureSpec;
use crate::sampling::{generate, reduce, SchemeConfig};

pub const DEFAULT_REPLICATIONS: usize = 20_000;
/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "EXPO_ENTROPY_WORKERS";
/// PRI is only reported for at least this many replications.
pub const PRI_MIN_REPLICATIONS: usize = 1_000;
/// A cell aborts when more than this fraction of replications fail.
pub const MAX_FAILURE_RATE: f64 = 1e-4;
const CHUNK: usize = 512;

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub scheme: SchemeConfig,
    pub theta_grid: Vec<Vec<f64>>,
    pub sigma: f64,
    pub loss: LossModel,
    pub estimators: Vec<EstimatorId>,
    pub replications: usize,
    pub master_seed: u64,
    pub quad: QuadratureSpec,
    pub bz_method: BzMethod,
    /// Reuse the same substreams in every cell.
    pub common_random_numbers: bool,
    /// Worker threads; `None` defers to the environment, then to all cores.
    pub workers: Option<usize>,
}

impl SimulationPlan {
    /// A plan with `σ = 1` and default numerics.
    pub fn new(
        scheme: SchemeConfig,
        theta_grid: Vec<Vec<f64>>,
        loss: LossModel,
        estimators: Vec<EstimatorId>,
        replications: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            scheme,
            theta_grid,
            sigma: 1.0,
            loss,
            estimators,
            replications,
            master_seed,
            quad: QuadratureSpec::default(),
            bz_method: BzMethod::Auto,
            common_random_numbers: false,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        self.quad.validate()?;
        if self.theta_grid.is_empty() {
            return domain("theta grid is empty");
        }
        if let Some(bad) = self.theta_grid.iter().find(|t| t.len() != self.scheme.k || t.iter().any(|v| !v.is_finite())) {
            return domain(format!("theta {bad:?} must have k = {} finite entries", self.scheme.k));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return domain(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.replications == 0 {
            return domain("replications must be positive");
        }
        if !self.estimators.contains(&EstimatorId::Mrie) {
            return Err(Error::Contract("the estimator list must include mrie, the PRI baseline".into()));
        }
        if self.estimators.contains(&EstimatorId::Bayes) {
            return Err(Error::Contract("the Bayes rule is not simulated (its risk depends on the prior)".into()));
        }
        if self.workers == Some(0) {
            return domain("workers must be positive");
        }
        Ok(())
    }

    /// The estimators of this plan with constants for the scheme's shape.
    pub fn suite(&self) -> Result<EstimatorSuite> {
        let constants = compute_constants_for_shape(&self.loss, self.scheme.k, self.scheme.shape_m(), &self.quad)?;
        let mut suite = EstimatorSuite::new(self.loss.clone(), constants, self.quad);
        suite.bz_method = self.bz_method;
        Ok(suite)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the substream for replication `rep` of `cell` (`None` under common random numbers).
pub fn stream_seed(master_seed: u64, cell: Option<u64>, rep: u64) -> u64 {
    let h = splitmix64(master_seed);
    let h = splitmix64(h ^ cell.map_or(u64::MAX, |c| c.wrapping_mul(0xA24B_AED4_963E_E407)));
    splitmix64(h ^ rep)
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / total as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count = total;
    }

    fn std_err(&self) -> Option<f64> {
        (self.count > 1).then(|| (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt())
    }
}

#[derive(Debug, Clone, Default)]
struct CellAccumulator {
    moments: Vec<Moments>,
    failed: usize,
    first_error: Option<String>,
}

impl CellAccumulator {
    fn new(estimators: usize) -> Self {
        Self {
            moments: vec![Moments::default(); estimators],
            failed: 0,
            first_error: None,
        }
    }

    fn merge(mut self, other: CellAccumulator) -> Self {
        for (a, b) in self.moments.iter_mut().zip(&other.moments) {
            a.merge(b);
        }
        self.failed += other.failed;
        if self.first_error.is_none() {
            self.first_error = other.first_error;
        }
        self
    }
}

/// Monte Carlo risk of one estimator in one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub risk: f64,
    /// `None` with a single successful replication.
    pub std_err: Option<f64>,
    pub failed: usize,
}

fn run_cell(
    plan: &SimulationPlan,
    cell: usize,
    estimators: &[&dyn PointEstimator],
) -> Result<Vec<RiskEstimate>> {
    let theta = &plan.theta_grid[cell];
    let key = (!plan.common_random_numbers).then_some(cell as u64);
    let ln_sigma = plan.sigma.ln();
    let chunks: Vec<(usize, usize)> = (0..plan.replications)
        .step_by(CHUNK)
        .map(|start| (start, (start + CHUNK).min(plan.replications)))
        .collect();

    let partials: Vec<CellAccumulator> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = CellAccumulator::new(estimators.len());
            let mut losses = vec![0.0; estimators.len()];
            for rep in start..end {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(plan.master_seed, key, rep as u64));
                let outcome = generate(&plan.scheme, theta, plan.sigma, &mut rng)
                    .and_then(|raw| reduce(&plan.scheme, &raw))
                    .and_then(|stats| {
                        for (slot, est) in losses.iter_mut().zip(estimators) {
                            let err = est.estimate(&stats)? - ln_sigma;
                            *slot = plan.loss.eval(err);
                            if !slot.is_finite() {
                                return Err(Error::Domain(format!("{} produced a non-finite loss", est.label())));
                            }
                        }
                        Ok(())
                    });
                match outcome {
                    Ok(()) => {
                        for (m, &l) in acc.moments.iter_mut().zip(&losses) {
                            m.push(l);
                        }
                    }
                    Err(e) => {
                        acc.failed += 1;
                        acc.first_error.get_or_insert_with(|| format!("replication {rep}: {e}"));
                    }
                }
            }
            acc
        })
        .collect();

    let total = partials
        .into_iter()
        .fold(CellAccumulator::new(estimators.len()), CellAccumulator::merge);
    if total.failed as f64 > MAX_FAILURE_RATE * plan.replications as f64 || total.failed == plan.replications {
        return Err(Error::SimulationAborted {
            failed: total.failed,
            replications: plan.replications,
            first_error: total.first_error.unwrap_or_default(),
        });
    }
    Ok(total
        .moments
        .iter()
        .map(|m| RiskEstimate {
            risk: m.mean,
            std_err: m.std_err(),
            failed: total.failed,
        })
        .collect())
}

fn resolve_workers(plan: &SimulationPlan) -> Result<Option<usize>> {
    if let Some(w) = plan.workers {
        return Ok(Some(w));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(Some(w)),
            _ => domain(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")),
        },
        _ => Ok(None),
    }
}

fn with_workers<T: Send>(plan: &SimulationPlan, job: impl FnOnce() -> T + Send) -> Result<T> {
    match resolve_workers(plan)? {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Contract(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn cell_index(plan: &SimulationPlan, theta: &[f64]) -> Result<usize> {
    plan.theta_grid
        .iter()
        .position(|t| t.as_slice() == theta)
        .ok_or_else(|| Error::Contract(format!("theta {theta:?} is not in the plan's grid")))
}

/// Risk of one estimator at one grid point, on that cell's substreams.
pub fn estimate_risk(plan: &SimulationPlan, theta: &[f64], estimator: EstimatorId) -> Result<RiskEstimate> {
    plan.validate()?;
    let cell = cell_index(plan, theta)?;
    let suite = plan.suite()?;
    let member = suite.member(estimator);
    if estimator == EstimatorId::Bayes {
        return Err(Error::Contract("the Bayes rule is not simulated".into()));
    }
    let est: [&dyn PointEstimator; 1] = [&member];
    with_workers(plan, || run_cell(plan, cell, &est))?.map(|mut v| v.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    /// Observed values per population.
    pub n: usize,
    pub theta: Vec<f64>,
    pub estimator: String,
    pub risk: f64,
    pub std_err: Option<f64>,
    /// `(R₀ − R)/R₀ × 100` against the invariant estimator.
    pub pri: Option<f64>,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub replications: usize,
    pub master_seed: u64,
    pub rows: Vec<RiskRow>,
}

impl RiskTable {
    pub fn row(&self, theta: &[f64], estimator: &str) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.theta == theta && r.estimator == estimator)
    }
}

/// `(R₀ − R)/R₀ × 100`.
pub fn pri(risk0: f64, risk: f64) -> f64 {
    (risk0 - risk) / risk0 * 100.0
}

/// Risks, standard errors and PRIs over the full `theta_grid × estimators` cross.
pub fn pri_table(plan: &SimulationPlan) -> Result<RiskTable> {
    pri_table_with(plan, &[])
}

/// [`pri_table`] with additional estimators appended after the plan's own.
pub fn pri_table_with(plan: &SimulationPlan, extra: &[&dyn PointEstimator]) -> Result<RiskTable> {
    plan.validate()?;
    let suite = plan.suite()?;
    let members: Vec<SuiteMember<'_>> = plan.estimators.iter().map(|&id| suite.member(id)).collect();
    let mut estimators: Vec<&dyn PointEstimator> = members.iter().map(|m| m as &dyn PointEstimator).collect();
    estimators.extend_from_slice(extra);
    let baseline = plan.estimators.iter().position(|&e| e == EstimatorId::Mrie).unwrap_or(0);

    let cells = with_workers(plan, || {
        (0..plan.theta_grid.len())
            .map(|cell| run_cell(plan, cell, &estimators))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut rows = Vec::with_capacity(cells.len() * estimators.len());
    for (theta, risks) in plan.theta_grid.iter().zip(cells) {
        let risk0 = risks[baseline].risk;
        for (est, r) in estimators.iter().zip(&risks) {
            rows.push(RiskRow {
                n: plan.scheme.n,
                theta: theta.clone(),
                estimator: est.label(),
                risk: r.risk,
                std_err: r.std_err,
                pri: (plan.replications >= PRI_MIN_REPLICATIONS).then(|| pri(risk0, r.risk)),
                failed: r.failed,
            });
        }
    }
    Ok(RiskTable {
        replications: plan.replications,
        master_seed: plan.master_seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceFlag {
    pub n: usize,
    pub theta: Vec<f64>,
    pub estimator: String,
    pub risk: f64,
    pub baseline_risk: f64,
    /// `2·sqrt(se² + se₀²)`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub cells_checked: usize,
    pub flags: Vec<DominanceFlag>,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Flags rows whose risk exceeds the invariant estimator's by more than two
/// combined standard errors.
pub fn scan_table(table: &RiskTable) -> DominanceReport {
    let baseline = EstimatorId::Mrie.as_str();
    let mut flags = Vec::new();
    let mut cells_checked = 0;
    for row in table.rows.iter().filter(|r| r.estimator != baseline) {
        let Some(base) = table
            .rows
            .iter()
            .find(|b| b.estimator == baseline && b.theta == row.theta && b.n == row.n)
        else {
            continue;
        };
        cells_checked += 1;
        let se = row.std_err.unwrap_or(0.0);
        let se0 = base.std_err.unwrap_or(0.0);
        let margin = 2.0 * (se * se + se0 * se0).sqrt();
        if row.risk > base.risk + margin {
            flags.push(DominanceFlag {
                n: row.n,
                theta: row.theta.clone(),
                estimator: row.estimator.clone(),
                risk: row.risk,
                baseline_risk: base.risk,
                margin,
            });
        }
    }
    DominanceReport { cells_checked, flags }
}

pub fn dominance_scan(plan: &SimulationPlan) -> Result<DominanceReport> {
    Ok(scan_table(&pri_table(plan)?))
}

pub fn dominance_scan_with(plan: &SimulationPlan, extra: &[&dyn PointEstimator]) -> Result<DominanceReport> {
    Ok(scan_table(&pri_table_with(plan, extra)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::SufficientStats;
    use crate::losses::squared_error_loss;
    use crate::numerics::trigamma;

    fn plan(reps: usize) -> SimulationPlan {
        SimulationPlan::new(
            SchemeConfig::iid(2, 4).unwrap(),
            vec![vec![0.1, 0.1], vec![0.5, 0.1]],
            squared_error_loss(),
            vec![EstimatorId::Mrie, EstimatorId::Stein, EstimatorId::Bz],
            reps,
            20_240_601,
        )
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut whole = Moments::default();
        data.iter().for_each(|&x| whole.push(x));
        let mut left = Moments::default();
        let mut right = Moments::default();
        data[..333].iter().for_each(|&x| left.push(x));
        data[333..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert_eq!(left.count, whole.count);
        assert!((left.mean - whole.mean).abs() < 1e-12);
        assert!((left.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn stream_seeds_differ() {
        let a = stream_seed(1, Some(0), 0);
        assert_ne!(a, stream_seed(1, Some(1), 0));
        assert_ne!(a, stream_seed(1, Some(0), 1));
        assert_ne!(a, stream_seed(2, Some(0), 0));
        assert_ne!(a, stream_seed(1, None, 0));
    }

    #[test]
    fn plan_validation() {
        let mut p = plan(10);
        p.estimators = vec![EstimatorId::Stein];
        assert!(matches!(p.validate(), Err(Error::Contract(_))));
        let mut p = plan(10);
        p.estimators.push(EstimatorId::Bayes);
        assert!(p.validate().is_err());
        let mut p = plan(10);
        p.theta_grid.push(vec![0.1]);
        assert!(p.validate().is_err());
        let mut p = plan(10);
        p.sigma = -1.0;
        assert!(p.validate().is_err());
        assert!(plan(0).validate().is_err());
    }

    #[test]
    fn table_shape_and_pri() {
        let t = pri_table(&plan(2_000)).unwrap();
        assert_eq!(t.rows.len(), 6);
        for row in &t.rows {
            let base = t.row(&row.theta, "mrie").unwrap();
            assert_eq!(row.pri.unwrap(), pri(base.risk, row.risk));
            assert!(row.risk >= 0.0 && row.std_err.unwrap() > 0.0);
        }
        assert_eq!(t.row(&[0.1, 0.1], "mrie").unwrap().pri, Some(0.0));
    }

    #[test]
    fn small_runs_omit_pri_and_single_runs_omit_std_err() {
        let t = pri_table(&plan(10)).unwrap();
        assert!(t.rows.iter().all(|r| r.pri.is_none() && r.std_err.is_some()));
        let t = pri_table(&plan(1)).unwrap();
        assert!(t.rows.iter().all(|r| r.std_err.is_none()));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut p = plan(3_000);
        p.workers = Some(1);
        let one = pri_table(&p).unwrap();
        p.workers = Some(3);
        let three = pri_table(&p).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn mrie_risk_near_trigamma() {
        let p = plan(20_000);
        let r = estimate_risk(&p, &[0.1, 0.1], EstimatorId::Mrie).unwrap();
        let exact = trigamma(6.0).unwrap();
        assert!((r.risk - exact).abs() < 3.0 * r.std_err.unwrap());
    }

    #[test]
    fn common_random_numbers_make_mrie_location_free() {
        let mut p = plan(2_000);
        p.theta_grid = vec![vec![0.1, 0.1], vec![5.0, 5.0]];
        p.common_random_numbers = true;
        let a = estimate_risk(&p, &[0.1, 0.1], EstimatorId::Mrie).unwrap();
        let b = estimate_risk(&p, &[5.0, 5.0], EstimatorId::Mrie).unwrap();
        assert!((a.risk - b.risk).abs() < 1e-12);
        assert!(estimate_risk(&p, &[0.2, 0.2], EstimatorId::Mrie).is_err());
    }

    struct Shifted<'a>(SuiteMember<'a>);

    impl PointEstimator for Shifted<'_> {
        fn label(&self) -> String {
            "mrie+1".into()
        }
        fn estimate(&self, stats: &SufficientStats) -> Result<f64> {
            Ok(self.0.estimate(stats)? + 1.0)
        }
    }

    #[test]
    fn adversarial_estimator_is_flagged_everywhere() {
        let p = plan(2_000);
        let suite = p.suite().unwrap();
        let bad = Shifted(suite.member(EstimatorId::Mrie));
        let report = dominance_scan_with(&p, &[&bad]).unwrap();
        let flagged: Vec<_> = report.flags.iter().filter(|f| f.estimator == "mrie+1").collect();
        assert_eq!(flagged.len(), p.theta_grid.len());
    }

    struct Flaky;

    impl PointEstimator for Flaky {
        fn label(&self) -> String {
            "flaky".into()
        }
        fn estimate(&self, stats: &SufficientStats) -> Result<f64> {
            if stats.s < 3.0 {
                Err(Error::Domain("refusing small S".into()))
            } else {
                Ok(stats.s.ln())
            }
        }
    }

    #[test]
    fn failing_replications_abort_the_cell() {
        let err = pri_table_with(&plan(1_000), &[&Flaky]).unwrap_err();
        assert!(matches!(err, Error::SimulationAborted { failed, .. } if failed > 0));
    }
}
