use std::process::ExitCode;

use clap::Parser;
use heli2dof::cli::{run_suite, Cli, CliError, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = match args.into_config() {
                Ok(config) => config,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run_suite(&config) {
                Ok(outcome) => {
                    if let Some(path) = &outcome.gains_path {
                        println!("wrote {}", path.display());
                    }
                    for path in &outcome.csv_paths {
                        println!("wrote {}", path.display());
                    }
                    for path in &outcome.report_paths {
                        println!("wrote {}", path.display());
                    }
                    if outcome.success() {
                        ExitCode::SUCCESS
                    } else {
                        for (scenario, diagnostic) in &outcome.failures {
                            eprintln!("scenario '{scenario}' failed: {diagnostic}");
                        }
                        ExitCode::FAILURE
                    }
                }
                Err(e @ CliError::BadArgs(_)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
