use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use torus_rg::commands::{self, Outcome, ScanParam, EXIT_CONFIG};
use torus_rg::report::REPORT_FILE;

/// Invariant tori of perturbed rotators by multiscale renormalization.
#[derive(Parser)]
#[command(name = "torus-rg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the torus and write report, coefficients and trajectory.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Independently re-check a report written by `solve`.
    Verify {
        /// Path to report.json (defaults to OUT/report.json).
        report: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One solve per parameter value; writes scan.csv.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated values, e.g. 1e-5,1e-4,1e-3.
        #[arg(long)]
        param_list: String,
        #[arg(long, value_enum, default_value_t = Param::Lambda)]
        param: Param,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Scale occupancy and per-scale Ward/resonance tables.
    DiagnoseScales {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Lambda,
    Eta,
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    let values = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?} in --param-list")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("--param-list is empty");
    }
    Ok(values)
}

fn dispatch(cli: Cli) -> anyhow::Result<Outcome> {
    Ok(match cli.command {
        Command::Solve { config, out } => commands::cmd_solve(&config, &out),
        Command::Verify { report, out } => commands::cmd_verify(&report.unwrap_or_else(|| out.join(REPORT_FILE))),
        Command::Scan {
            config,
            out,
            param_list,
            param,
            jobs,
        } => {
            let param = match param {
                Param::Lambda => ScanParam::Lambda,
                Param::Eta => ScanParam::Eta,
            };
            commands::cmd_scan(&config, &out, param, &parse_list(&param_list)?, jobs)
        }
        Command::DiagnoseScales { config, out } => commands::cmd_diagnose_scales(&config, &out),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(outcome) => {
            for m in &outcome.messages {
                if outcome.code == 0 {
                    println!("{m}");
                } else {
                    eprintln!("{m}");
                }
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
