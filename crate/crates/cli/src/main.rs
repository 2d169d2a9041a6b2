//! `errprob`: error-probability curves, fading averages, local SNR bounds,
//! verification sweeps and adaptive-modulation metrics as CSV or JSON.
//!
//! Exit codes: 0 ok, 1 verification violations, 2 usage, 3 numerical failure,
//! 4 model not applicable (no log-linear asymptote).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod modspec;
mod output;

use std::io;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use errprob::Error;

use commands::{AvgEpArgs, BoundsArgs, EpArgs, McArgs, OutageArgs, SeArgs, VerifyArgs};

#[derive(Debug, Parser)]
#[command(name = "errprob", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Error probability in AWGN over an SNR sweep.
    Ep(EpArgs),
    /// Error probability averaged over fading.
    AvgEp(AvgEpArgs),
    /// Asymptotic and local upper/lower bounds over a region of interest.
    Bounds(BoundsArgs),
    /// Run the inequality and log-concavity sweeps.
    Verify(VerifyArgs),
    /// Mean spectral efficiency of an adaptive M-QAM scheme.
    Se(SeArgs),
    /// Error outage under log-normal shadowing.
    Outage(OutageArgs),
    /// Monte Carlo estimate of symbol or bit error rate.
    Mc(McArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Model(String),
    Violations(usize),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(m) => CliError::Usage(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let r = match &cli.cmd {
        Command::Ep(a) => commands::cmd_ep(a),
        Command::AvgEp(a) => commands::cmd_avg_ep(a),
        Command::Bounds(a) => commands::cmd_bounds(a),
        Command::Verify(a) => commands::cmd_verify(a),
        Command::Se(a) => commands::cmd_se(a),
        Command::Outage(a) => commands::cmd_outage(a),
        Command::Mc(a) => commands::cmd_mc(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match &e {
                CliError::Violations(n) => {
                    eprintln!("errprob: {n} violation(s)");
                    1
                }
                CliError::Usage(m) => {
                    eprintln!("errprob: {m}");
                    2
                }
                CliError::Numeric(m) => {
                    eprintln!("errprob: numerical failure: {m}");
                    3
                }
                CliError::Model(m) => {
                    eprintln!("errprob: {m}");
                    4
                }
                CliError::Io(err) => {
                    eprintln!("errprob: {err}");
                    3
                }
            };
            ExitCode::from(code)
        }
    }
}
