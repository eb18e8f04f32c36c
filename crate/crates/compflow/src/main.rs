//! Command-line front end: parses a subcommand plus config overrides, runs
//! the matching pipeline stage, and maps the outcome to an exit status.
//!
//! Exit codes: 0 — the stage ran with no audit violations; 1 — the stage
//! ran but flagged violations, or failed mid-run; 2 — configuration error
//! (missing/unreadable/invalid config, bad override, unknown flag).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use compflow::config::RunConfig;
use compflow::pipeline::{
    run_cells, run_classify, run_entropy, run_ipset, run_occupation, run_recurrent,
    run_verify, StageOutcome,
};
use compflow::Error;

#[derive(Parser)]
#[command(
    name = "compflow",
    version,
    about = "Seeded order-structure analysis of competitive flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the TOML run configuration (required).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Truncates the subdivision schedule to end at this depth.
    #[arg(long, global = true, value_name = "N")]
    depth: Option<u32>,
    /// Overrides the return tolerance with an absolute value.
    #[arg(long, global = true, value_name = "X")]
    theta: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Outer-approximate the chain-recurrent skeleton by box subdivision.
    Recurrent,
    /// Classify component order structure and run the consistency audits.
    Classify,
    /// Reconstruct invariant cells and audit them.
    Cells,
    /// Generate and verify an IP set of near-return times.
    Ipset,
    /// Estimate topological entropy from spanning counts.
    Entropy,
    /// Histogram the occupation support of the witness orbit.
    Occupation,
    /// Run every stage into subdirectories and write a combined summary.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) if outcome.violations == 0 => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} audit violation(s); see the written artifacts", outcome.violations);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::ConfigParse(_) | Error::Io(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<StageOutcome, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <PATH> is required".into()))?;
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg = cfg.with_out_dir(out.clone());
    }
    if let Some(depth) = cli.depth {
        cfg = cfg.with_final_depth(depth)?;
    }
    if let Some(theta) = cli.theta {
        cfg = cfg.with_theta(theta)?;
    }
    let outcome = match cli.command {
        Command::Recurrent => run_recurrent(&cfg)?,
        Command::Classify => run_classify(&cfg)?,
        Command::Cells => run_cells(&cfg)?,
        Command::Ipset => run_ipset(&cfg)?,
        Command::Entropy => run_entropy(&cfg)?,
        Command::Occupation => run_occupation(&cfg)?,
        Command::Verify => run_verify(&cfg)?,
    };
    println!("wrote {} artifact(s)", outcome.artifacts.len());
    Ok(outcome)
}
