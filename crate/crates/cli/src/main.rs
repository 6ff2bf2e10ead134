mod args;
mod commands;
mod input;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

const EXIT_DATA: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(accfair::Error),
}

impl From<accfair::Error> for CliError {
    fn from(e: accfair::Error) -> Self {
        CliError::Data(e)
    }
}

fn run(cli: &Cli) -> Result<commands::Output, CliError> {
    match &cli.command {
        Command::Score(a) => commands::score(cli, a),
        Command::Fairness(a) => commands::fairness(cli, a),
        Command::Aggregate(a) => commands::aggregate(cli, a),
        Command::Sweep(a) => commands::sweep(cli, a),
        Command::AuditCompas(a) => commands::audit_compas(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(&cli) {
        Ok(commands::Output(text)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(EXIT_DATA);
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            if let accfair::Error::BadRows { errors } = e.root() {
                for r in errors.iter().take(20) {
                    eprintln!("  row {}: {}", r.row, r.message);
                }
                if errors.len() > 20 {
                    eprintln!("  ... {} more", errors.len() - 20);
                }
            }
            ExitCode::from(EXIT_DATA)
        }
    }
}
