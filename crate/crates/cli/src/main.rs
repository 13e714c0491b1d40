use std::process::ExitCode;

use clap::Parser;
use eisfam_cli::commands::{resolve_config, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve_config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(&cli.command, &cfg, |line| eprintln!("{line}")) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.emit(&cfg) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
