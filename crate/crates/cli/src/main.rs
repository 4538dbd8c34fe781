use std::io::Write;
use std::process::ExitCode;

use atlas_cli::{run, Cli, Exit};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(Exit::UserError.code()),
            };
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info,tower_http=warn".into()),
        )
        .init();
    let result = run(&cli);
    if result.exit == Exit::Success {
        // A closed stdout must not turn success into a panic.
        let _ = writeln!(std::io::stdout(), "{}", result.summary);
    } else {
        eprintln!("error: {}", result.summary);
    }
    result.exit_code()
}
