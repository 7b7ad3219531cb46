use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weakconc::scenario::{self, Scenario};

/// Exact and Monte Carlo checks of weak-concentration bounds.
#[derive(Parser)]
#[command(name = "weakconc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Run {
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the scenario's `output`, else ./out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the check catalog.
    ListChecks,
    /// Print the built-in graph families.
    Families,
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, threads: Option<usize>) -> weakconc::Result<i32> {
    let mut s = Scenario::from_file(&config)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let dir = out
        .or_else(|| s.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&s.name));
    let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let outcome = scenario::run_scenario_with_threads(&s, threads.max(1))?;
    outcome.write_to(&dir)?;
    print!("{}", outcome.report.summary_table());
    println!("artifacts in {}", dir.display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::ListChecks => {
            print!("{}", scenario::list_checks());
            0
        }
        Command::Families => {
            print!("{}", scenario::list_families());
            0
        }
        Command::Run { config, seed, out, threads } => match run(config, seed, out, threads) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
