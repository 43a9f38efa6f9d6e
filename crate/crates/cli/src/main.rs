use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldgmin_cli::plot::Series;
use ldgmin_cli::run::{plot_history, read_history, RunError};
use ldgmin_cli::{execute, RunArgs, EXIT_SOLVER, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "ldgmin", version, about = "LDG minimization benchmarks on the L-shaped domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark and write history.csv and manifest.json.
    Run(RunArgs),
    /// Combine history.csv files into one log-log plot.
    Plot {
        /// Output SVG file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "convergence")]
        title: String,
        /// Polynomial degrees for the reference slopes.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<usize>,
        /// history.csv files, one series each.
        #[arg(required = true)]
        histories: Vec<PathBuf>,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("LDGMIN_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| format!("LDGMIN_THREADS must be a positive integer, got '{value}'"))?;
    if n == 0 {
        return Err("LDGMIN_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return code(EXIT_USAGE);
    }
    match cli.command {
        Command::Run(args) => {
            let settings = match args.resolve() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(EXIT_USAGE);
                }
            };
            match execute(&settings) {
                Ok(outcome) => {
                    for r in &outcome.records {
                        println!("level {:>2}  ndof {:>8}  eta {:.6e}  gap {:.3e}  iters {}", r.level, r.ndof, r.eta, r.gap, r.iters);
                    }
                    match outcome.failure {
                        Some(msg) => {
                            eprintln!("error: {msg}");
                            code(EXIT_SOLVER)
                        }
                        None => ExitCode::SUCCESS,
                    }
                }
                Err(RunError::Usage(e)) => {
                    eprintln!("error: {e}");
                    code(EXIT_USAGE)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(EXIT_SOLVER)
                }
            }
        }
        Command::Plot { out, title, k, histories } => {
            let mut series = Vec::new();
            for path in &histories {
                match read_history(path) {
                    Ok(points) => series.push(Series { label: path.display().to_string(), points }),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return code(EXIT_USAGE);
                    }
                }
            }
            if let Err(e) = std::fs::write(&out, plot_history(&title, &series, &k)) {
                eprintln!("error: {e}");
                return code(EXIT_SOLVER);
            }
            ExitCode::SUCCESS
        }
    }
}
