use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use pacdp::config::{seed_override, thread_cap};
use pacdp::{ingest, CliError};
use pacdp_core::privacy::{GlobalBounds, PrivacyBudget};

#[derive(Parser)]
#[command(name = "pacdp", version, about = "Private inference on group mean differences from partitioned, censored data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo scenario and emit a metrics table.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Directory for metrics.csv, outcomes.csv and scenario.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze a dataset and print a JSON report.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Release one private quantile of a CSV column.
    #[command(group(ArgGroup::new("budget").required(true).args(["epsilon", "rho"])))]
    Quantile {
        #[arg(long)]
        input: PathBuf,
        /// Column name; defaults to the first column.
        #[arg(long)]
        column: Option<String>,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        lower: f64,
        #[arg(long, allow_hyphen_values = true)]
        upper: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn print(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io("<stdout>", e))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = thread_cap()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot size the thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config, out } => {
            let (_, csv) = pacdp::simulate(&config, out.as_deref())?;
            if out.is_none() {
                print(&csv)?;
            }
        }
        Command::Analyze { config } => {
            let req = pacdp::load_analyze(&config)?;
            print(&pacdp::report_json(&pacdp::analyze(&req)?))?;
        }
        Command::Quantile {
            input,
            column,
            q,
            epsilon,
            rho,
            lower,
            upper,
            seed,
        } => {
            let budget = match (epsilon, rho) {
                (Some(e), None) => PrivacyBudget::pure(e),
                (None, Some(r)) => PrivacyBudget::zcdp(r),
                _ => unreachable!("clap enforces exactly one budget"),
            }
            .map_err(|e| CliError::config(e.to_string()))?;
            let bounds = GlobalBounds::new(lower, upper).map_err(|e| CliError::config(e.to_string()))?;
            let seed = match seed {
                Some(s) => s,
                None => seed_override()?.ok_or_else(|| CliError::config("--seed or PACDP_SEED is required"))?,
            };
            let file = File::open(&input).map_err(|e| CliError::io(&input, e))?;
            let values = ingest::read_column(BufReader::new(file), column.as_deref())?;
            let rep = pacdp::quantile(&values, q, budget, bounds, seed)?;
            print(&(serde_json::to_string(&rep).expect("report serializes") + "\n"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
