use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use expo_entropy::numerics::QuadratureSpec;
use expo_entropy::validation::{ValidationGrid, ValidationOptions};
use expo_entropy_cli::commands::{cmd_estimate, cmd_risk_table, cmd_validate};
use expo_entropy_cli::config::{OutputFormat, RunConfig};

/// Entropy estimation for exponential populations sharing a scale parameter.
#[derive(Parser)]
#[command(name = "expo-entropy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Default,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate ln σ and the entropies from data.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// One file with a population per line, or one file per population.
        #[arg(long, num_args = 1..)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Monte Carlo risks and percentage risk improvements.
    RiskTable {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Run the numerical and Monte Carlo self-checks.
    Validate {
        #[arg(long, value_enum, default_value = "default")]
        grid: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Added to the closed-form q0 (negative control).
        #[arg(long, hide = true, allow_hyphen_values = true)]
        inject_constant_error: Option<f64>,
        /// Absolute and relative quadrature tolerance.
        #[arg(long, hide = true)]
        quad_tol: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Estimate { config, data, out, format } => {
            let cfg = RunConfig::load(&config)?;
            let out = out.or_else(|| cfg.output.clone());
            let format = format.or(cfg.format).unwrap_or_default();
            cmd_estimate(&cfg, &data, out.as_deref(), format)?;
            Ok(true)
        }
        Command::RiskTable { config, out, reps, seed, format } => {
            let cfg = RunConfig::load(&config)?;
            let Some(out) = out.or_else(|| cfg.output.clone()) else {
                anyhow::bail!("risk-table needs --out or `output` in the config");
            };
            let format = format.or(cfg.format).unwrap_or_default();
            cmd_risk_table(&cfg, &out, reps, seed, format)?;
            Ok(true)
        }
        Command::Validate { grid, out, format, reps, seed, inject_constant_error, quad_tol } => {
            let mut opts = ValidationOptions {
                grid: match grid {
                    Grid::Default => ValidationGrid::Default,
                    Grid::Full => ValidationGrid::Full,
                },
                ..ValidationOptions::default()
            };
            if let Some(r) = reps {
                opts.replications = r;
            }
            if let Some(s) = seed {
                opts.seed = s;
            }
            if let Some(e) = inject_constant_error {
                opts.constant_offset = e;
            }
            if let Some(tol) = quad_tol {
                let q = opts.quad;
                opts.quad = QuadratureSpec::new(q.node_count, tol, tol, q.max_refinements)?;
            }
            let report = cmd_validate(&opts, out.as_deref(), format)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("error: check {} failed: {}", c.name, c.detail);
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
