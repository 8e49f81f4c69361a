use std::process::ExitCode;

use clap::Parser;
use saddlekit_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match saddlekit_cli::run(&cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.status as u8)
        }
    }
}
