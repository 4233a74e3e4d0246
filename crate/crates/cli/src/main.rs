//! `ckn-lab`: command-line front end for the ckn-core laboratory.
//!
//! Exit codes: 0 success, 1 a numerical check failed, 2 invalid usage or
//! parameters.

mod args;
mod cmd;
mod output;

use args::{Cli, Command};
use clap::Parser;
use std::process::ExitCode;

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Check(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let out = cli.out.clone();
    let result = match cli.command {
        Command::Region(a) => cmd::region::run(a, &out),
        Command::Constants(a) => cmd::constants::run(a, &out),
        Command::Gap(a) => cmd::gap::run(a, &out),
        Command::Flow(a) => cmd::flow::run(a, &out),
        Command::Verify(a) => cmd::verify::run(a, &out),
        Command::Transform(a) => cmd::transform::run(a, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(e)) => {
            eprintln!("check failed: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
