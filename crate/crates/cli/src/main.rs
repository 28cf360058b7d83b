mod commands;
mod failure;
mod options;

use std::process::ExitCode;

use clap::error::ErrorKind;

use failure::{Failure, EXIT_USAGE};
use options::{command, specs, Settings};

fn run() -> Result<(), Failure> {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return Ok(());
            }
            ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                let _ = e.print();
                return Err(Failure::usage("a subcommand is required"));
            }
            _ => {
                let rendered = e.render().to_string();
                let line = rendered
                    .lines()
                    .find(|l| !l.trim().is_empty())
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error:")
                    .trim()
                    .to_string();
                return Err(Failure::usage(line));
            }
        },
    };
    let (name, sub) = matches
        .subcommand()
        .ok_or_else(|| Failure::usage("a subcommand is required"))?;
    let spec = specs()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Failure::usage(format!("unknown subcommand {name}")))?;
    let settings = Settings::resolve(&spec, sub)?;
    commands::run(&settings)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(u8::try_from(f.exit).unwrap_or(EXIT_USAGE as u8))
        }
    }
}
