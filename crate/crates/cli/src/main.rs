mod args;
mod commands;
mod error;

use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;

fn init_logging() {
    let level = match std::env::var("ALTOGETHER_LOG") {
        Ok(v) => log::LevelFilter::from_str(v.trim()).unwrap_or_else(|_| {
            eprintln!("ignoring ALTOGETHER_LOG={v:?}; expected error, info or debug");
            log::LevelFilter::Info
        }),
        Err(_) => log::LevelFilter::Info,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(error::Exit::Validation as u8),
            };
        }
    };
    init_logging();
    let jobs = cli.jobs;
    match altogether_core::par::with_jobs(jobs, move || commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit as u8)
        }
    }
}
