use std::process::ExitCode;

use clap::Parser;
use mmm_bench::cli::Cli;
use mmm_bench::commands::execute;

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
