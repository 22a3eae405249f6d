mod args;
mod commands;
mod error;
mod settings;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::commands::Ctx;

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
    let result = settings::resolve(&cli.global, |k| std::env::var(k).ok()).and_then(|settings| {
        match serde_json::to_string(&settings) {
            Ok(text) => eprintln!("apf: resolved config {text}"),
            Err(e) => eprintln!("apf: could not render config: {e}"),
        }
        commands::dispatch(&Ctx { settings }, &cli.command)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("apf: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
