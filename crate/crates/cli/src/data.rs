//! Delimited-text data ingestion: one population per line, or one per file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

fn split_values(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

fn parse_line(path: &Path, lineno: usize, line: &str) -> Result<Vec<f64>> {
    split_values(line)
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .with_context(|| format!("{}:{lineno}: cannot parse '{tok}' as a finite number", path.display()))
        })
        .collect()
}

/// Non-empty, non-comment lines as `(line number, values)`.
fn parse_file(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read data file {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        rows.push((i + 1, parse_line(path, i + 1, line)?));
    }
    Ok(rows)
}

/// With one path, every line is a population; with several, every file is.
pub fn read_populations(paths: &[PathBuf]) -> Result<Vec<Vec<f64>>> {
    match paths {
        [] => bail!("no data files given"),
        [single] => {
            let rows = parse_file(single)?;
            if rows.is_empty() {
                bail!("{}: no data rows", single.display());
            }
            Ok(rows.into_iter().map(|(_, v)| v).collect())
        }
        many => many
            .iter()
            .map(|p| {
                let values: Vec<f64> = parse_file(p)?.into_iter().flat_map(|(_, v)| v).collect();
                if values.is_empty() {
                    bail!("{}: no values", p.display());
                }
                Ok(values)
            })
            .collect(),
    }
}
