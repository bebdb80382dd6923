use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fscap_cli::{commands, config, CliError, ExperimentConfig, Outcome};

#[derive(Parser)]
#[command(name = "fscap", version, about = "Capacity bounds for finite-state channels with sampled feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and list every defect with its JSON pointer.
    Validate(Common),
    /// λ-sweep per block length: sweep_N.csv, envelope_N.csv, report.json.
    CapacitySweep(Common),
    /// Single-letter lower bounds over a cost grid: bounds.csv.
    Bounds(Common),
    /// Compare the optimized quantities with brute-force oracles.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Random-coding exponent of the optimized policy: exponent_N.csv.
    Exponent(Common),
}

fn run(command: &Command) -> Result<Outcome, CliError> {
    let common = match command {
        Command::Validate(c) | Command::CapacitySweep(c) | Command::Bounds(c) | Command::Exponent(c) => c,
        Command::OracleCheck { common, .. } => common,
    };
    let cfg: ExperimentConfig = config::load(&common.config)?;
    let out: &Path = &common.out;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Semantic(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Validate(_) => commands::validate(&cfg),
        Command::CapacitySweep(_) => commands::capacity_sweep(&cfg, out),
        Command::Bounds(_) => commands::bounds(&cfg, out),
        Command::OracleCheck { inject_fault, .. } => commands::oracle_check(&cfg, out, *inject_fault),
        Command::Exponent(_) => commands::exponent(&cfg, out),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli.command);
    let failure = match result {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            outcome.failure
        }
        Err(e) => Some(e),
    };
    match failure {
        None => ExitCode::SUCCESS,
        Some(CliError::Invalid(issues)) => {
            for i in &issues {
                println!("{i}");
            }
            ExitCode::from(1)
        }
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
