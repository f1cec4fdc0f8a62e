//! Report and table output: one `report.json` per run plus plot-ready CSV
//! tables. Reports embed the resolved config (as TOML text) so any run can
//! be reproduced from its own output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use ruelle::clt::Histogram;
use ruelle::{GibbsWeights, GridFunction};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub config_toml: String,
    pub results: Value,
    pub timings: Value,
}

pub fn write_report(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    results: Value,
    seconds: f64,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let report = Report {
        schema_version: crate::config::SCHEMA_VERSION,
        command: command.to_string(),
        config: config.clone(),
        config_toml: config.to_toml(),
        results,
        timings: json!({ "total_seconds": seconds }),
    };
    let path = dir.join("report.json");
    let mut file = fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut file, &report)
        .map_err(|e| CliError::io(format!("serialize report: {e}")))?;
    file.write_all(b"\n")?;
    Ok(path)
}

pub fn write_grid_function(dir: &Path, name: &str, f: &GridFunction) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let file = fs::File::create(dir.join(name))?;
    f.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

pub fn write_weights(dir: &Path, name: &str, w: &GibbsWeights) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let file = fs::File::create(dir.join(name))?;
    w.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

/// Histogram table with the fitted Gaussian density at each bin midpoint.
pub fn write_histogram(
    dir: &Path,
    name: &str,
    histogram: &Histogram,
    sigma2: Option<f64>,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut out = std::io::BufWriter::new(fs::File::create(dir.join(name))?);
    writeln!(out, "bin_left,bin_right,count,gaussian_density")?;
    for (i, &count) in histogram.counts.iter().enumerate() {
        let (left, right) = (histogram.edges[i], histogram.edges[i + 1]);
        let density = match sigma2 {
            Some(s2) if s2 > 0.0 => {
                let mid = 0.5 * (left + right);
                (-(mid * mid) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt()
            }
            _ => 0.0,
        };
        writeln!(out, "{left:.17e},{right:.17e},{count},{density:.17e}")?;
    }
    Ok(())
}

/// Generic wide table: a header row and rows of numeric cells.
pub fn write_table(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut out = std::io::BufWriter::new(fs::File::create(dir.join(name))?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
