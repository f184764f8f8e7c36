use std::process::ExitCode;

use aor_cli::{emit, execute, EXIT_INVALID, EXIT_OK};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match aor_cli::cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK),
                _ => ExitCode::from(EXIT_INVALID),
            };
        }
    };
    match execute(&cli).and_then(|(settings, output)| emit(&settings, &output)) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
