mod args;
mod config;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use config::EX_USAGE;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EX_USAGE as u8),
            };
        }
    };
    let outcome = match &cli.command {
        Command::Speed(a) => run::speed(a),
        Command::Curve(a) => run::curve(a),
        Command::Sweep(a) => run::sweep(a),
        Command::Fit(a) => run::fit(a),
        Command::Oracle(a) => run::oracle(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kppfront: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
