//! Command-line driver: run rate studies, probe source conditions, and
//! exercise the built-in numerical self-test.
//!
//! Exit codes: 0 success, 1 failed verdict or failed self-test, 2 bad
//! configuration or arguments, 3 more than a fifth of the solves did not
//! converge.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tikhrate::experiment;

#[derive(Parser)]
#[command(
    name = "tikhrate",
    version,
    about = "Convex Tikhonov regularization rate experiments on finite-dimensional l^r spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a grid of regularized problems and fit the error-decay slope
    Run(RunArgs),
    /// Sample the variational inequality and range diagnostic of a source
    Probe(ProbeArgs),
    /// Run the built-in numerical consistency checks
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Write the per-solve CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the JSON summary here (it is always printed to stdout)
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Worker threads (defaults to all cores; TIKHRATE_SINGLE_THREAD=1
    /// forces one)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    /// Largest accepted relative deviation
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Seed of the randomized checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const EXIT_OK: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Selftest(args) => cmd_selftest(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err.downcast_ref::<tikhrate::Error>() {
                Some(tikhrate::Error::Config(_) | tikhrate::Error::Io(_)) => EXIT_CONFIG,
                _ => EXIT_FAIL,
            };
            ExitCode::from(code)
        }
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<u8> {
    let config = experiment::load_config(&args.config)?;
    let artifacts = experiment::run(&config, args.jobs)?;
    if let Some(path) = &args.csv {
        fs::write(path, &artifacts.csv)?;
    }
    if let Some(path) = &args.summary {
        fs::write(path, &artifacts.summary_json)?;
    }
    print!("{}", artifacts.summary_json);
    let report = &artifacts.report;
    eprintln!(
        "{}: slope {} (predicted {} within {}), {} rows, {} unconverged",
        report.verdict,
        report.slope,
        report.predicted,
        report.tolerance,
        report.n_rows,
        report.n_failed
    );
    if report.n_rows > 0 && report.n_failed * 5 > report.n_rows {
        return Ok(EXIT_UNSTABLE);
    }
    if !report.passed() && !report.exploratory {
        return Ok(EXIT_FAIL);
    }
    Ok(EXIT_OK)
}

fn cmd_probe(args: ProbeArgs) -> anyhow::Result<u8> {
    let config = experiment::load_config(&args.config)?;
    let report = experiment::probe(&config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(EXIT_OK)
}

fn cmd_selftest(args: SelftestArgs) -> anyhow::Result<u8> {
    let report = experiment::selftest(args.tolerance, args.seed)?;
    for check in &report.checks {
        println!(
            "check {}: {} ({})",
            check.name,
            if check.passed { "ok" } else { "FAILED" },
            check.detail
        );
    }
    if report.passed {
        println!("self-test passed");
        Ok(EXIT_OK)
    } else {
        println!("self-test FAILED");
        Ok(EXIT_FAIL)
    }
}
