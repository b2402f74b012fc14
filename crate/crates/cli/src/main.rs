use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weakmeter_core::config::load_scenario;
use weakmeter_core::exec::Execution;
use weakmeter_core::report::{compare_decompositions, run_scan, validate, Verdict};
use weakmeter_core::Error;

const THREADS_ENV: &str = "WEAKMETER_THREADS";

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_INCONSISTENT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "weakmeter",
    version,
    about = "Meter readout statistics of weak measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the exact readout moments over the configured s grid and
    /// write scan.csv and report.json.
    Scan {
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Compute scan rows on a single thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Print the term-by-term decomposition of the conditional variance
    /// growth next to the weak-variance reading and the numerical oracle.
    Decompose {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Report the meter symmetry and unbiasedness checks as JSON.
    Validate { config: PathBuf },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::DegeneratePostselection { .. } => EXIT_DEGENERATE,
        Error::RouteDisagreement { .. } | Error::NonFinite(_) => EXIT_INCONSISTENT,
        Error::Config { .. }
        | Error::DimensionMismatch { .. }
        | Error::NotHermitian { .. }
        | Error::NotUnitary { .. }
        | Error::InvalidState(_)
        | Error::TruncationLeak { .. }
        | Error::MissingPostselection
        | Error::PureStateRequired(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => EXIT_FAILURE,
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Inconsistent => EXIT_INCONSISTENT,
        Verdict::Consistent | Verdict::PreconditionsViolated => 0,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Scan {
            config,
            out_dir,
            sequential,
        } => {
            let cfg = load_scenario(&config)?;
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let out = run_scan(&cfg, &out_dir, exec)?;
            println!("wrote {} ({} rows)", out.csv_path.display(), out.rows.len());
            println!("wrote {}", out.report_path.display());
            for a in &out.report.advisories {
                eprintln!("advisory: {a}");
            }
            if out.report.verdict == Verdict::Inconsistent {
                eprintln!("error: perturbative totals disagree with the finite-difference oracle");
            }
            Ok(verdict_code(out.report.verdict))
        }
        Command::Decompose { config, json } => {
            let table = compare_decompositions(&load_scenario(&config)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                print!("{}", table.render());
            }
            Ok(verdict_code(table.verdict))
        }
        Command::Validate { config } => {
            let report = validate(&load_scenario(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
