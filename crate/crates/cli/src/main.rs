//! Config-driven experiment runner for the transfer-operator workbench.
//!
//! Every subcommand reads a TOML config (or a built-in preset), writes a
//! `report.json` with the resolved config embedded, and emits plot-ready CSV
//! tables next to it. Exit codes: 0 success, 2 validation error,
//! 3 numerical non-convergence.

mod commands;
mod config;
mod presets;
mod report;
mod selftest;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        Self { code: 2, message }
    }

    pub fn numerical(message: String) -> Self {
        Self { code: 3, message }
    }

    pub fn io(message: String) -> Self {
        Self { code: 1, message }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<ruelle::Error> for CliError {
    fn from(e: ruelle::Error) -> Self {
        use ruelle::Error as E;
        match &e {
            E::NonConvergence { .. } | E::SeriesDivergence { .. } | E::ConsistencyCheck(_) => {
                Self::numerical(e.to_string())
            }
            E::Io(_) => Self::io(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "ruelle",
    version,
    about = "Transfer-operator workbench: spectra, Gibbs measures, derivatives, variance, CLT"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in preset: iid-pm1, markov-indicator, circle-cos, coboundary.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Path to a TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides config and RUELLE_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for sampling commands.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Leading eigenvalue, eigenfunction, eigenmeasure, and Gibbs weights.
    Rpf(RunArgs),
    /// Normalize the configured potential.
    Normalize(RunArgs),
    /// Pressure, slope, and curvature along the observable direction.
    PressureCurve(RunArgs),
    /// Asymptotic variance by four routes (plus Monte Carlo when seeded).
    Variance(RunArgs),
    /// Distributional central-limit check of Birkhoff window sums.
    Clt(RunArgs),
    /// Entropy and pressure derivatives against finite-difference stencils.
    EntropyDerivatives(RunArgs),
    /// Haar and kernel basis tables for a two-symbol Markov measure.
    Basis(RunArgs),
    /// Run the built-in invariant battery.
    Selftest,
}

fn load_config(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let (text, base_dir) = match (&args.preset, &args.config) {
        (Some(name), None) => {
            let text = presets::lookup(name).ok_or_else(|| {
                CliError::validation(format!(
                    "unknown preset {name:?} (available: {})",
                    presets::PRESET_NAMES.join(", ")
                ))
            })?;
            (text.to_string(), PathBuf::from("."))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::validation(format!("cannot read {}: {e}", path.display()))
            })?;
            let base = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."))
                .to_path_buf();
            (text, base)
        }
        _ => {
            return Err(CliError::validation(
                "provide exactly one of --preset or --config".into(),
            ))
        }
    };
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.display().to_string();
    } else if let Ok(dir) = std::env::var("RUELLE_OUT_DIR") {
        cfg.output.dir = dir;
    }
    cfg.validate()?;
    Ok((cfg, base_dir))
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let (name, args): (&str, &RunArgs) = match command {
        Command::Rpf(a) => ("rpf", a),
        Command::Normalize(a) => ("normalize", a),
        Command::PressureCurve(a) => ("pressure-curve", a),
        Command::Variance(a) => ("variance", a),
        Command::Clt(a) => ("clt", a),
        Command::EntropyDerivatives(a) => ("entropy-derivatives", a),
        Command::Basis(a) => ("basis", a),
        Command::Selftest => {
            let failures = selftest::run();
            if failures > 0 {
                return Err(CliError::numerical(format!(
                    "selftest: {failures} check(s) failed"
                )));
            }
            return Ok(());
        }
    };
    let (cfg, base_dir) = load_config(args)?;
    let out = PathBuf::from(&cfg.output.dir);
    let outcome = match name {
        "rpf" => commands::rpf(&cfg, &base_dir, &out)?,
        "normalize" => commands::normalize(&cfg, &base_dir, &out)?,
        "pressure-curve" => commands::pressure_curve(&cfg, &base_dir, &out)?,
        "variance" => commands::variance(&cfg, &base_dir, &out)?,
        "clt" => commands::clt(&cfg, &base_dir, &out)?,
        "entropy-derivatives" => commands::entropy_derivatives(&cfg, &base_dir, &out)?,
        "basis" => commands::basis(&cfg, &base_dir, &out)?,
        _ => unreachable!(),
    };
    println!("wrote {}", outcome.report_path.display());
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}

#[cfg(test)]
mod tests {
    use super::CliError;

    #[test]
    fn exit_codes_by_error_kind() {
        let numerical = CliError::from(ruelle::Error::NonConvergence {
            residual: 1.0,
            iterations: 3,
        });
        assert_eq!(numerical.code, 3);
        let numerical = CliError::from(ruelle::Error::SeriesDivergence {
            terms: 10,
            increment: 0.5,
        });
        assert_eq!(numerical.code, 3);
        let validation = CliError::from(ruelle::Error::InvalidArgument("x".into()));
        assert_eq!(validation.code, 2);
        let validation = CliError::from(ruelle::Error::NotNormalized(0.1));
        assert_eq!(validation.code, 2);
    }
}
