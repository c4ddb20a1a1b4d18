//! qdmsim: batch front-end for gate sweeps, protocol runs and stabilizer
//! certification. All outputs are CSV (plus a plain-text step log).

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::CommandOutput;
pub use config::RunConfig;
pub use error::{CliError, ConfigError};

#[derive(Debug, Parser)]
#[command(
    name = "qdmsim",
    version,
    about = "Quantum-dot-molecule gate and photonic-state simulator"
)]
pub struct Cli {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Measurement sampler seed (overrides [run] seed).
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, value_name = "INT")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Gate error of R_Y(π/2) and R_Y(π) across the mixing angle η.
    GateSweep,
    /// Protocol runs for N = 1..n_max with certification.
    Protocol,
    /// Full-dynamics detuning sweeps against the closed-form values.
    DetuningCheck,
    /// Stabilizer expectations and witness bound of one state.
    Verify,
}

/// Loads and validates the configuration with command-line overrides
/// applied last.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if cli.threads == Some(0) {
        return Err(ConfigError::new("--threads", "must be at least 1").into());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let out = &cfg.output.dir;
    match command {
        Command::GateSweep => commands::cmd_gate_sweep(cfg, out),
        Command::Protocol => commands::cmd_protocol(cfg, out),
        Command::DetuningCheck => commands::cmd_detuning_check(cfg, out),
        Command::Verify => commands::cmd_verify(cfg, out),
    }
}
