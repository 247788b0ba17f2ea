use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use perichannel::run::{apply_overrides, run, run_sweep, RunMode, RunReport};
use perichannel::RunConfig;

/// Steady Stokes and Navier-Stokes flow in a periodic channel.
#[derive(Parser)]
#[command(name = "perichannel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write fields, traces and a manifest.
    Solve(RunArgs),
    /// Solve and run the full identity suite.
    Verify(RunArgs),
    /// Manufactured-solution mesh study.
    Convergence(RunArgs),
    /// Run the config for several lambdas and/or meshes in parallel.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated pressure-loss coefficients.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        /// Comma-separated resolutions n of n x n meshes.
        #[arg(long, value_delimiter = ',')]
        meshes: Vec<usize>,
        #[arg(long, value_enum, default_value_t = SweepMode::Solve)]
        mode: SweepMode,
    },
    /// Print the effective config (defaults when no file is given).
    Config { config: Option<PathBuf> },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Override the pressure-loss coefficient.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Solve,
    Verify,
}

fn load(args: &RunArgs) -> Result<RunConfig, perichannel::Error> {
    let config = RunConfig::from_file(&args.config)?;
    Ok(apply_overrides(config, args.out.clone(), args.lambda))
}

fn print_report(label: &str, report: &RunReport) {
    for c in &report.checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        println!("{label}{verdict} {} = {:e} ({})", c.name, c.value, c.bound);
    }
    if let Some(msg) = &report.failure {
        println!("{label}FAILED: {msg}");
    }
}

fn execute(cli: Cli) -> Result<u8, perichannel::Error> {
    let (args, mode) = match cli.command {
        Command::Solve(a) => (a, RunMode::Solve),
        Command::Verify(a) => (a, RunMode::Verify),
        Command::Convergence(a) => (a, RunMode::Convergence),
        Command::Sweep {
            run: args,
            lambdas,
            meshes,
            mode,
        } => {
            let mode = match mode {
                SweepMode::Solve => RunMode::Solve,
                SweepMode::Verify => RunMode::Verify,
            };
            let results = run_sweep(&load(&args)?, mode, &lambdas, &meshes)?;
            for (label, report) in &results {
                print_report(&format!("[{label}] "), report);
            }
            return Ok(u8::from(!results.iter().all(|(_, r)| r.success())));
        }
        Command::Config { config } => {
            let config = match config {
                Some(path) => RunConfig::from_file(path)?,
                None => RunConfig::default(),
            };
            print!("{}", config.to_config_string());
            return Ok(0);
        }
    };
    let config = load(&args)?;
    let report = run(&config, mode)?;
    print_report("", &report);
    println!("output written to {}", config.output.display());
    Ok(report.exit_code() as u8)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
