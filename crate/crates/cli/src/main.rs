use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynbc_cli::{execute, exit_code};

#[derive(Parser)]
#[command(
    name = "dynbc",
    version,
    about = "Parabolic problems with dynamic boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check compatibility, ellipticity and transversality of the problem.
    Validate(RunArgs),
    /// Solve over the full horizon with windowed Picard iteration.
    Solve(RunArgs),
    /// Spatial and temporal convergence orders against manufactured solutions.
    MmsConverge(RunArgs),
    /// Small-time scaling exponents of the linear solution.
    Scaling(RunArgs),
    /// Picard contraction ratios across a ladder of window lengths.
    Contraction(RunArgs),
    /// Picard runs from several seeds in the ball must agree.
    Uniqueness(RunArgs),
    /// Time regularity of the boundary trace with and without compatibility.
    CompatNecessity(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Validate(a) => ("validate", a),
        Command::Solve(a) => ("solve", a),
        Command::MmsConverge(a) => ("mms-converge", a),
        Command::Scaling(a) => ("scaling", a),
        Command::Contraction(a) => ("contraction", a),
        Command::Uniqueness(a) => ("uniqueness", a),
        Command::CompatNecessity(a) => ("compat-necessity", a),
    };
    let result = execute(name, &args.config, &args.out, args.seed);
    match &result {
        Ok(report) => {
            if !args.quiet {
                println!("{name}: {}", if report.pass { "PASS" } else { "FAIL" });
                for (k, v) in &report.records {
                    println!("  {k} = {v}");
                }
                for f in &report.failures {
                    println!("  failed: {f}");
                }
                println!("  report: {}", args.out.join("report.json").display());
            }
        }
        Err(e) => eprintln!("dynbc {name}: {e}"),
    }
    ExitCode::from(exit_code(&result))
}
