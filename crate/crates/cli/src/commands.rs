//! The three subcommands, independent of argument parsing.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use expo_entropy::estimators::{bayes_squared_error, EstimateReport, EstimatorId, EstimatorSuite};
use expo_entropy::losses::{check_dominance_condition, compute_constants_for_shape};
use expo_entropy::numerics::QuadratureSpec;
use expo_entropy::sampling::{reduce, SchemeKind};
use expo_entropy::simulation::{pri_table, RiskRow, SimulationPlan, DEFAULT_REPLICATIONS};
use expo_entropy::validation::{run_validation, ValidationOptions, ValidationReport};

use crate::config::{OutputFormat, RunConfig};
use crate::data::read_populations;
use crate::output::{write_estimates, write_risk_rows, write_validation};

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Point estimates of `ln σ` and the entropies for one dataset.
pub fn estimate(config: &RunConfig, data: &[PathBuf]) -> Result<Vec<EstimateReport>> {
    let paths: Vec<PathBuf> = if data.is_empty() {
        config.input.clone().context("no data given (use --data or `input` in the config)")?
    } else {
        data.to_vec()
    };
    let raw = read_populations(&paths)?;
    let scheme = config.single_scheme()?;
    let stats = reduce(&scheme, &raw)?;
    let loss = config.loss_model()?;
    let quad = QuadratureSpec::default();
    let constants = compute_constants_for_shape(&loss, scheme.k, scheme.shape_m(), &quad)?;
    let ids = config.estimator_ids()?;
    if ids.contains(&EstimatorId::Stein) && check_dominance_condition(&loss, &constants, &quad)? >= 0.0 {
        eprintln!("warning: the dominance condition fails for this loss; the stein estimate may not improve on mrie");
    }
    let suite = EstimatorSuite::new(loss, constants, quad);

    let mut reports = Vec::with_capacity(ids.len());
    for id in ids {
        let report = match id {
            EstimatorId::Bayes => {
                if scheme.kind != SchemeKind::Iid {
                    bail!("the bayes estimator needs complete i.i.d. samples, scheme is {}", scheme.kind);
                }
                if suite.loss.linex_a().is_some() {
                    bail!("the bayes estimator is the posterior mean under squared error loss");
                }
                bayes_squared_error(&raw, &config.bayes_prior()?)?
            }
            other => suite.report(other, &stats)?,
        };
        reports.push(match config.alpha {
            Some(a) => report.with_renyi(a)?,
            None => report,
        });
    }
    Ok(reports)
}

pub fn cmd_estimate(config: &RunConfig, data: &[PathBuf], out: Option<&Path>, format: OutputFormat) -> Result<()> {
    let reports = estimate(config, data)?;
    let mut w = sink(out)?;
    write_estimates(&mut w, &reports, format)?;
    w.flush()?;
    Ok(())
}

/// Risk rows for every sample size in the config.
pub fn risk_rows(config: &RunConfig, reps: Option<usize>, seed: Option<u64>) -> Result<Vec<RiskRow>> {
    let seed = seed.or(config.seed).context("risk-table needs a seed (config `seed` or --seed)")?;
    let replications = reps.or(config.replications).unwrap_or(DEFAULT_REPLICATIONS);
    let grid = config.theta_grid.clone().context("risk-table needs theta_grid")?;
    let loss = config.loss_model()?;
    let estimators = config.estimator_ids()?;
    let mut rows = Vec::new();
    for n in config.sample_sizes()? {
        let mut plan = SimulationPlan::new(config.scheme_for(n)?, grid.clone(), loss.clone(), estimators.clone(), replications, seed);
        if let Some(sigma) = config.sigma {
            plan.sigma = sigma;
        }
        plan.common_random_numbers = config.common_random_numbers;
        rows.extend(pri_table(&plan)?.rows);
    }
    Ok(rows)
}

pub fn cmd_risk_table(
    config: &RunConfig,
    out: &Path,
    reps: Option<usize>,
    seed: Option<u64>,
    format: OutputFormat,
) -> Result<()> {
    let rows = risk_rows(config, reps, seed)?;
    let mut w = sink(Some(out))?;
    write_risk_rows(&mut w, &rows, format)?;
    w.flush()?;
    Ok(())
}

/// Runs the oracle suite; the caller turns a failed report into a nonzero exit.
pub fn cmd_validate(opts: &ValidationOptions, out: Option<&Path>, format: OutputFormat) -> Result<ValidationReport> {
    let report = run_validation(opts);
    let mut w = sink(out)?;
    write_validation(&mut w, &report, format)?;
    w.flush()?;
    Ok(report)
}
