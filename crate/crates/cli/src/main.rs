//! `fanlab`: scenario runner writing CSV and JSON artifacts.

mod args;
mod commands;
mod output;
mod parse;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, ModelsAction};
use commands::Failure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match &cli.command {
        Command::Models { action } => match action {
            ModelsAction::List => commands::models_list(),
            ModelsAction::Verify(a) => commands::models_verify(a),
        },
        Command::Layer(a) => commands::layer(a),
        Command::Wavefan(a) => commands::wavefan(a),
        Command::Viscous(a) => commands::viscous(a),
        Command::Solve(a) => commands::solve(a),
        Command::Compare(a) => commands::compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
