//! Command-line experiments on top of `aor-core`.
//!
//! Every subcommand resolves its settings (flags, then config file, then
//! defaults), evaluates the selected engines over its grid in parallel and
//! writes the rows in grid order, so a fixed seed gives byte-identical output.

pub mod cli;
pub mod commands;
pub mod config;
pub mod engine;
pub mod error;
pub mod output;

use std::collections::BTreeMap;
use std::io::Write;

use cli::Cli;
use commands::Output;
use config::{parse_config_file, Settings};
use engine::EngineRegistry;
use error::CliResult;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_CROSS_CHECK: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

pub fn execute(cli: &Cli) -> CliResult<(Settings, Output)> {
    let (kind, flags) = cli.command.split();
    let file = match &flags.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    let settings = Settings::resolve(kind, &flags.to_map(), &file)?;
    let output = commands::run(&settings, &EngineRegistry::builtin())?;
    Ok((settings, output))
}

/// Writes the output where the settings ask and returns the exit code.
pub fn emit(settings: &Settings, output: &Output) -> CliResult<u8> {
    match &settings.out {
        Some(path) => {
            std::fs::write(path, &output.text)?;
            if let Some(sidecar) = &output.sidecar {
                std::fs::write(path.with_extension("json"), sidecar)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(output.text.as_bytes())?;
            stdout.flush()?;
        }
    }
    if output.cross_check_failed {
        eprintln!("error: a simulated value is more than 4 standard errors from the closed form");
        return Ok(EXIT_CROSS_CHECK);
    }
    Ok(EXIT_OK)
}
