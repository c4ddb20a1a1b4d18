use std::process::ExitCode;

use clap::Parser;

use qdm_cli::{execute, resolve_config, Cli, CliError};

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| qdm_cli::ConfigError::new("--threads", e.to_string()))?;
    }
    let output = execute(cli.command, &cfg)?;
    println!("{}", output.summary);
    for f in &output.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdmsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
