//! Front end for the `fracopt` binary: config resolution, subcommands and
//! report files.

pub mod args;
pub mod bench;
pub mod checks;
pub mod commands;
pub mod config;
pub mod diagnose;
pub mod dump;
pub mod error;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::checks::Fault;
use crate::config::RunConfig;
use crate::error::{exit, CliError, CliResult};

fn dispatch(cli: Cli) -> CliResult<i32> {
    let mut overrides = cli.common.overrides().map_err(CliError::Usage)?;
    let mut sizes = None;
    let mut fault = Fault::default();
    match &cli.command {
        Command::Sweep(s) => {
            for (key, v) in
                [("delta_sweep", &s.deltas), ("n_sweep", &s.ns), ("alpha_sweep", &s.alphas), ("beta_sweep", &s.betas)]
            {
                if let Some(v) = v {
                    overrides.push((key.into(), v.clone()));
                }
            }
        }
        Command::Validate(v) => {
            if let Some(cap) = &v.cap {
                overrides.push(("cap".into(), cap.clone()));
            }
            fault.perturb_caputo = v.inject_fault.unwrap_or(0.0);
        }
        Command::Bench(b) => {
            if let Some(r) = &b.reps {
                overrides.push(("reps".into(), r.clone()));
            }
            sizes = b.sizes.clone();
        }
        Command::Solve | Command::Diagnose => {}
    }
    let cfg = RunConfig::resolve(cli.common.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Solve => commands::cmd_solve(&cfg),
        Command::Sweep(_) => commands::cmd_sweep(&cfg),
        Command::Validate(_) => commands::cmd_validate(&cfg, fault),
        Command::Diagnose => commands::cmd_diagnose(&cfg),
        Command::Bench(_) => {
            let sizes = match sizes {
                Some(s) => {
                    let mut tmp = cfg.clone();
                    tmp.set("n_sweep", &s)?;
                    tmp.n_sweep.unwrap_or_default()
                }
                None => vec![cfg.n],
            };
            commands::cmd_bench(&cfg, &sizes)
        }
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::ERROR } else { exit::OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit::ERROR
        }
    }
}
