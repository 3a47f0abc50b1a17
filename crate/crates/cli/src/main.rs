use std::process::ExitCode;

use clap::Parser;
use icc_cli::{run, Cli, CliError};

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("ICC_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::config(
            "ICC_THREADS",
            format!("expected a positive integer, got `{v}`"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let outcome = init_threads().and_then(|_| run(&cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
