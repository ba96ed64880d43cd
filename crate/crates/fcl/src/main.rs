use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fcl::cli::{self, CheckArgs};

/// Numerical engine for generalized Kropina metrics: geodesic sprays,
/// Berwald curvature and constant flag curvature verdicts.
#[derive(Parser)]
#[command(name = "fcl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Echo a parsed metric definition and basic derived quantities.
    Info { file: PathBuf },

    /// Print spray coefficients, the deviation tensor and h/W data at a
    /// point-direction pair.
    Spray {
        file: PathBuf,
        /// Base point, comma-separated (e.g. --point 0.1,0.2).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
        /// Direction, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dir: Vec<f64>,
    },

    /// Decide by dense sampling whether the instance has constant flag
    /// curvature; emits a JSON report. Exit 0 on PASS, 1 on FAIL.
    Check {
        file: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        tol_residual: Option<f64>,
        #[arg(long)]
        tol_k: Option<f64>,
        /// Worker threads (defaults to FCL_THREADS or the machine size).
        #[arg(long)]
        threads: Option<usize>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Run the cross-identity suite and print per-identity residuals.
    Verify {
        file: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },

    /// Integrate a geodesic and emit a CSV trajectory.
    Geodesic {
        file: PathBuf,
        /// Start point, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        start: Vec<f64>,
        /// Initial velocity, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        velocity: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> Result<u8, fcl::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Info { file } => {
            print!("{}", cli::cmd_info(&file)?);
            Ok(0)
        }
        Command::Spray { file, point, dir } => {
            print!("{}", cli::cmd_spray(&file, &point, &dir)?);
            Ok(0)
        }
        Command::Check {
            file,
            samples,
            seed,
            tol_residual,
            tol_k,
            threads,
            out,
        } => {
            let args = CheckArgs {
                samples,
                seed,
                tol_residual,
                tol_k,
                threads,
            };
            let (json, pass) = cli::cmd_check(&file, &args)?;
            match out {
                Some(path) => std::fs::write(path, json.as_bytes())?,
                None => println!("{json}"),
            }
            Ok(if pass { 0 } else { 1 })
        }
        Command::Verify { file, samples } => {
            let (table, pass) = cli::cmd_verify(&file, samples)?;
            print!("{table}");
            Ok(if pass { 0 } else { 1 })
        }
        Command::Geodesic {
            file,
            start,
            velocity,
            t_end,
            dt,
            out,
        } => {
            let csv = cli::cmd_geodesic(&file, &start, &velocity, t_end, dt)?;
            match out {
                Some(path) => std::fs::write(path, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(cli::error_exit_code(&err))
        }
    }
}
