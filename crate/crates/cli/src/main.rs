use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use arbor_cli::{render, run, Cli, CliError};

/// Sizes the worker pool from `ARBOR_WORKERS` when it is set.
fn init_workers() -> Result<(), CliError> {
    let Ok(value) = std::env::var("ARBOR_WORKERS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("ARBOR_WORKERS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let result = init_workers()
        .and_then(|()| run(&cli, &argv))
        .and_then(|report| render(&report, cli.config.format));
    match result {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|()| out.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
