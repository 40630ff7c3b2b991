//! Command-line driver: argument parsing, run configuration and the
//! subcommands that write artifacts into an output directory.

mod args;
mod commands;
mod error;
mod output;
mod samples;
mod settings;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Value};

pub use crate::error::{CliError, CliResult};
pub use crate::settings::Settings;

use crate::args::Cli;
use crate::output::Output;
use crate::settings::overlay;

/// Outcome of parsing and running one invocation.
pub enum Invocation {
    /// Help or version text; print it and exit 0.
    Info(String),
    Done(Value),
}

/// Parse `args` (program name first) and run the command.
pub fn invoke<I, T>(args: I) -> CliResult<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => Ok(Invocation::Info(e.to_string())),
                _ => Err(CliError::Usage(e.to_string().trim().to_string())),
            };
        }
    };
    run(cli).map(Invocation::Done)
}

fn run(cli: Cli) -> CliResult<Value> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    overlay(&mut settings.seed, &cli.seed);
    overlay(&mut settings.threads, &cli.threads);
    cli.command.apply(&mut settings);
    settings.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = settings.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    let name = cli.command.name();
    let mut out = Output::create(&cli.out)?;
    let details = pool.install(|| commands::run(&cli.command, &settings, &mut out))?;
    out.write_text("config.toml", &settings.to_toml())?;
    let artifacts = out.finish(name, &settings)?;
    Ok(json!({ "status": "ok", "command": name, "out": cli.out, "artifacts": artifacts, "details": details }))
}
