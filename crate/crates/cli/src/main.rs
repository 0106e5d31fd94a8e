mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use good_core::{Error, ErrorCategory};

use args::Cli;
use config::Settings;

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Io => 3,
        ErrorCategory::Parse => 4,
        ErrorCategory::Validation => 5,
        ErrorCategory::Invariant => 6,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let threads = cli.threads.or(settings.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::validation(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| commands::run(cli.command, &settings))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{}]: {e}", cat.as_str());
            ExitCode::from(exit_code(cat))
        }
    }
}
