use std::process::ExitCode;

use clap::Parser;
use kdsim_core::cli::{self, exit, Cli, RunConfig};

fn main() -> ExitCode {
    let args = Cli::parse();
    let code = match RunConfig::from_cli(&args) {
        Err(e) => {
            eprintln!("kdsim: {e}");
            cli::exit_code(&e)
        }
        Ok(config) => match cli::run(&config) {
            Err(e) => {
                eprintln!("kdsim: {e}");
                cli::exit_code(&e)
            }
            Ok(outcome) => {
                for w in &outcome.warnings {
                    eprintln!("kdsim: warning: {w}");
                }
                let path = config.output_path();
                match cli::emit(&outcome.table, config.format, path.as_deref()) {
                    Ok(()) => exit::SUCCESS,
                    Err(e) => {
                        eprintln!("kdsim: cannot write output: {e}");
                        exit::IO
                    }
                }
            }
        },
    };
    ExitCode::from(code as u8)
}
