//! `paoi`: evaluate, optimize, simulate and sweep threshold policies for
//! transmission-plus-computation status update systems.

mod commands;
mod config;
mod error;
mod output;
mod validate;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_VALIDATION_FAILED};
use crate::output::{write_rows, Format, ResultRow};

#[derive(Parser)]
#[command(
    name = "paoi",
    version,
    about = "Peak age of information for transmission-plus-computation systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic average peak age of the configured policy.
    Eval(Args),
    /// Best parameter in the configured policy class, plus a trace file.
    Optimize(Args),
    /// Monte Carlo run of the configured policy.
    Simulate(Args),
    /// Optimize and simulate across the `sweep.ratio_grid`.
    Sweep(Args),
    /// Check analytic values against simulation and print a JSON report.
    Validate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Overrides `sim.packets`.
    #[arg(long)]
    packets: Option<usize>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn open(output: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match output {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::new(1, format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::new(1, format!("write failed: {e}"))
}

fn emit(rows: &[ResultRow], args: &Args) -> Result<(), CliError> {
    write_rows(rows, args.format, open(args.output.as_deref())?).map_err(io_err)
}

fn write_json<T: serde::Serialize>(value: &T, out: Box<dyn Write>) -> Result<(), CliError> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, value).map_err(io_err)?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err)
}

fn trace_target(args: &Args) -> Result<Box<dyn Write>, CliError> {
    match &args.output {
        Some(p) => open(Some(&commands::sibling(p, ".trace.json"))),
        None => Ok(Box::new(io::stderr().lock())),
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let (Command::Eval(args)
    | Command::Optimize(args)
    | Command::Simulate(args)
    | Command::Sweep(args)
    | Command::Validate(args)) = &cli.command;
    let cfg = ExperimentConfig::load(&args.config)?.with_overrides(args.packets, args.seed)?;
    match &cli.command {
        Command::Eval(_) => emit(&commands::eval(&cfg)?, args)?,
        Command::Optimize(_) => {
            let result = commands::optimize_cmd(&cfg);
            if let Err(e) = &result {
                if let Some(trace) = &e.trace {
                    write_json(trace, trace_target(args)?)?;
                }
            }
            let (rows, opt) = result?;
            emit(&rows, args)?;
            write_json(&opt, trace_target(args)?)?;
        }
        Command::Simulate(_) => emit(&commands::simulate_cmd(&cfg)?, args)?,
        Command::Sweep(_) => {
            let rows = commands::sweep_cmd(&cfg)?;
            info!("sweep produced {} rows", rows.len());
            emit(&rows, args)?;
            if let (Some(p), true) = (&args.output, cfg.sweep()?.gnuplot) {
                let gp = commands::sibling(p, ".gp");
                std::fs::write(&gp, commands::gnuplot_script(p, &rows)).map_err(io_err)?;
            }
        }
        Command::Validate(_) => {
            let settings = cfg.validate.clone().unwrap_or_default();
            let report = validate::run(&settings, &cfg.sim)?;
            write_json(&report, open(args.output.as_deref())?)?;
            if !report.pass {
                return Ok(ExitCode::from(EXIT_VALIDATION_FAILED as u8));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
