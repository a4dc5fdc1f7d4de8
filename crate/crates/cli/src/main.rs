use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match adrc::run(adrc::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
