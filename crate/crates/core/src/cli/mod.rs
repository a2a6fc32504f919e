//! Command-line front end: `frlevy <command> --config <path> [--seed N] [--replicas N] [--out DIR] [--plots]`.

pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, Command, ConfigError, RunConfig, SEED_ENV};
pub use run::{run, ExitCode, RunError, RunOutcome};

use crate::harness::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(name = "frlevy", version, about = "Fractional Lévy fields and the SPDEs they drive")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Sample the fractional Lévy field on a lattice of index points.
    SimulateField(CommonArgs),
    /// Solve the stochastic Poisson equation with zero Dirichlet data.
    SolvePoisson(CommonArgs),
    /// Solve the linear stochastic heat equation.
    SolveHeat(CommonArgs),
    /// Solve the quasilinear heat equation by Picard iteration.
    SolveQuasilinear(CommonArgs),
    /// Run the validation suite.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration document (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration and the FRLEVY_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Replica count; overrides the configuration.
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
}

/// Seed precedence: command line, configuration, environment, built-in default.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>, env: Option<&str>) -> Result<u64, String> {
    if let Some(s) = cli.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_ENV}: expected a non-negative integer, got {v:?}")),
        None => Ok(DEFAULT_SEED),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::ParameterError as i32 } else { 0 };
        }
    };
    let (command, args) = match cli.command {
        Sub::SimulateField(a) => (Command::SimulateField, a),
        Sub::SolvePoisson(a) => (Command::SolvePoisson, a),
        Sub::SolveHeat(a) => (Command::SolveHeat, a),
        Sub::SolveQuasilinear(a) => (Command::SolveQuasilinear, a),
        Sub::Validate(a) => (Command::Validate, a),
    };
    let text = match &args.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", p.display());
                return ExitCode::ParameterError as i32;
            }
        },
        None => String::new(),
    };
    let mut cfg = match parse_config(&text, Some(command)) {
        Ok(c) => c,
        Err(e) => {
            for m in &e.messages {
                eprintln!("error: {m}");
            }
            return ExitCode::ParameterError as i32;
        }
    };
    if let Some(r) = args.replicas {
        if r == 0 || (command == Command::Validate && r < 2) {
            eprintln!("error: --replicas too small");
            return ExitCode::ParameterError as i32;
        }
        cfg.replicas = r;
        cfg.validate.replicas = r;
    }
    cfg.plots |= args.plots;
    let env = std::env::var(SEED_ENV).ok();
    let seed = match resolve_seed(args.seed, cfg.seed, env.as_deref()) {
        Ok(s) => s,
        Err(m) => {
            eprintln!("error: {m}");
            return ExitCode::ParameterError as i32;
        }
    };
    for (name, holds) in &cfg.conditions {
        eprintln!("condition {name}: {}", if *holds { "holds" } else { "violated" });
    }
    match run(&cfg, seed, &args.out) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            outcome.exit_code() as i32
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code() as i32
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")), Ok(1));
        assert_eq!(resolve_seed(None, Some(2), Some("3")), Ok(2));
        assert_eq!(resolve_seed(None, None, Some("3")), Ok(3));
        assert_eq!(resolve_seed(None, None, None), Ok(DEFAULT_SEED));
        assert!(resolve_seed(None, None, Some("x")).is_err());
    }
}
