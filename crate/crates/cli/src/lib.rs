//! Command-line front end for `spinmarket-core`: configuration, plot-ready CSV
//! output, run manifests and the verification battery.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod verify;

use std::ffi::OsString;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::{execute, render_invariant, render_moments, render_simulate, render_sweep, render_verify};
use crate::config::PartialConfig;
use crate::error::{CliError, CliResult};

fn resolve(common: &args::CommonArgs, extra: PartialConfig) -> CliResult<config::RunConfig> {
    let file = match &common.config {
        Some(path) => PartialConfig::load(path)?,
        None => PartialConfig::default(),
    };
    let cli = PartialConfig {
        replicas: extra.replicas,
        mode: extra.mode,
        total: extra.total,
        from: extra.from,
        to: extra.to,
        ..common.partial()
    };
    cli.over(file).resolve()
}

/// Runs a parsed command and returns the text for standard output.
pub fn dispatch(command: Command) -> CliResult<(String, commands::Rendered)> {
    let (name, result) = match command {
        Command::Simulate { common, replicas } => {
            let cfg = resolve(&common, PartialConfig { replicas, ..Default::default() })?;
            ("simulate", execute("simulate", &cfg, render_simulate))
        }
        Command::Invariant { common, verify } => {
            let cfg = resolve(&common, PartialConfig::default())?;
            ("invariant", execute("invariant", &cfg, |c| render_invariant(c, verify)))
        }
        Command::Moments { common } => {
            let cfg = resolve(&common, PartialConfig::default())?;
            ("moments", execute("moments", &cfg, render_moments))
        }
        Command::Sweep { common, mode, total, from, to } => {
            let cfg = resolve(&common, PartialConfig { mode, total, from, to, ..Default::default() })?;
            ("sweep", execute("sweep", &cfg, render_sweep))
        }
        Command::Verify { common, quick, inject_fault } => {
            let cfg = resolve(&common, PartialConfig::default())?;
            ("verify", execute("verify", &cfg, |c| render_verify(c, quick, inject_fault)))
        }
    };
    let (paths, rendered) = result?;
    let mut report = rendered.stdout.clone();
    for p in &paths {
        report.push_str(&format!("wrote {}\n", p.display()));
    }
    let _ = name;
    Ok((report.trim_end().to_string(), rendered))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok((report, rendered)) => {
            println!("{report}");
            match rendered.failure {
                Some(msg) => {
                    let err = CliError::Verification(msg);
                    eprintln!("error: {err}");
                    err.exit_code()
                }
                None => 0,
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
