//! Library half of the `saddlekit` binary, split out so the commands can be
//! driven from tests.

pub mod args;
pub mod commands;
pub mod failure;
pub mod files;

use args::{Cli, Command};
use failure::CmdResult;

pub fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Verify(a) => commands::verify(a),
        Command::Bench(a) => commands::bench(a),
    }
}
