use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use readiness_service::cli::{self, Cli, Command, EXIT_INPUT};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            e.print().ok();
            return ExitCode::from(if help { 0 } else { EXIT_INPUT });
        }
    };
    let default_level = match cli.command {
        Command::Serve(_) | Command::FedCoordinator(_) => "info",
        _ => "warn",
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .init();
    ExitCode::from(cli::run(cli))
}
