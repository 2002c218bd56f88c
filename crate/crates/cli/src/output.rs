//! CSV and JSON emission of estimate reports, risk tables and validation results.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use expo_entropy::estimators::EstimateReport;
use expo_entropy::simulation::RiskRow;
use expo_entropy::validation::ValidationReport;

use crate::config::OutputFormat;

/// Not-applicable marker in CSV output.
pub const NA: &str = "NA";

/// Rounds to 7 significant digits and prints the shortest form of the result.
pub fn sig7(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.6e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), sig7)
}

pub fn write_estimates<W: Write>(out: W, reports: &[EstimateReport], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => serde_json::to_writer_pretty(out, reports)?,
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["estimator", "theta_hat", "shannon", "renyi_alpha", "renyi", "clipped", "fallback_branch"])?;
            for r in reports {
                w.write_record([
                    r.estimator.to_string(),
                    sig7(r.theta_hat),
                    sig7(r.shannon),
                    opt(r.renyi.map(|p| p.0)),
                    opt(r.renyi.map(|p| p.1)),
                    r.clipped.to_string(),
                    r.fallback_branch.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_risk_rows<W: Write>(out: W, rows: &[RiskRow], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => serde_json::to_writer_pretty(out, rows)?,
        OutputFormat::Csv => {
            let k = rows.first().map_or(0, |r| r.theta.len());
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["n".to_string()];
            header.extend((1..=k).map(|i| format!("theta{i}")));
            header.extend(["estimator", "risk", "std_err", "pri", "failed"].map(String::from));
            w.write_record(&header)?;
            for r in rows {
                let mut rec = vec![r.n.to_string()];
                rec.extend(r.theta.iter().map(|&t| sig7(t)));
                rec.extend([r.estimator.clone(), sig7(r.risk), opt(r.std_err), opt(r.pri), r.failed.to_string()]);
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field == NA {
        Ok(None)
    } else {
        Ok(Some(field.parse()?))
    }
}

/// Reads back a table written by [`write_risk_rows`].
pub fn read_risk_rows(path: &Path, format: OutputFormat) -> Result<Vec<RiskRow>> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    if format == OutputFormat::Json {
        return Ok(serde_json::from_reader(file)?);
    }
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers()?.clone();
    let k = header.iter().filter(|h| h.starts_with("theta")).count();
    if header.len() != k + 6 {
        bail!("unexpected risk table header {header:?}");
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let row = (|| -> Result<RiskRow> {
            Ok(RiskRow {
                n: rec[0].parse()?,
                theta: (1..=k).map(|j| rec[j].parse::<f64>()).collect::<std::result::Result<_, _>>()?,
                estimator: rec[k + 1].to_string(),
                risk: rec[k + 2].parse()?,
                std_err: parse_opt(&rec[k + 3])?,
                pri: parse_opt(&rec[k + 4])?,
                failed: rec[k + 5].parse()?,
            })
        })()
        .with_context(|| format!("{}:{line}: malformed risk row", path.display()))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_validation<W: Write>(mut out: W, report: &ValidationReport, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => serde_json::to_writer_pretty(&mut out, report)?,
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["check", "status", "residual", "tolerance", "detail"])?;
            for c in &report.checks {
                w.write_record([
                    c.name.clone(),
                    if c.passed { "PASS" } else { "FAIL" }.to_string(),
                    c.residual.map_or_else(|| NA.to_string(), |r| format!("{r:e}")),
                    format!("{:e}", c.tolerance),
                    c.detail.clone(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig7_rounds() {
        assert_eq!(sig7(0.181_322_955_737_115_33), "0.181323");
        assert_eq!(sig7(-0.850_652_649), "-0.8506526");
        assert_eq!(sig7(10.475_794_9), "10.47579");
        assert_eq!(sig7(0.0), "0");
        assert_eq!(sig7(1.999_999_96), "2");
        assert_eq!(sig7(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            RiskRow {
                n: 4,
                theta: vec![0.1, 0.2],
                estimator: "mrie".into(),
                risk: 0.181_322_95,
                std_err: Some(0.001_234_567_89),
                pri: Some(0.0),
                failed: 0,
            },
            RiskRow {
                n: 4,
                theta: vec![0.1, 0.2],
                estimator: "stein".into(),
                risk: 0.162_345_678_9,
                std_err: None,
                pri: None,
                failed: 1,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_risk_rows(std::fs::File::create(&path).unwrap(), &rows, OutputFormat::Csv).unwrap();
        let back = read_risk_rows(&path, OutputFormat::Csv).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(sig7(a.risk), sig7(b.risk));
            assert_eq!(a.std_err.map(sig7), b.std_err.map(sig7));
            assert_eq!(a.pri.map(sig7), b.pri.map(sig7));
            assert_eq!((a.n, &a.theta, &a.estimator, a.failed), (b.n, &b.theta, &b.estimator, b.failed));
        }
        let path = dir.path().join("t.json");
        write_risk_rows(std::fs::File::create(&path).unwrap(), &rows, OutputFormat::Json).unwrap();
        assert_eq!(read_risk_rows(&path, OutputFormat::Json).unwrap(), rows);
    }
}
