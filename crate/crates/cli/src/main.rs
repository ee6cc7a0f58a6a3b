//! Command-line front end: table generation, verification suites,
//! reconstruction runs, the hyperbola pipeline, and decay-bound reports.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 configuration error,
//! 3 numerical-accuracy failure.

mod checks;
mod commands;

use clap::{Parser, Subcommand};
use fourier_interp::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fourier-interp",
    version,
    about = "Radial Fourier interpolation bases at square-root nodes: tables, verification, perturbed reconstruction, hyperbola uniqueness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate basis coefficient tables b_{k,n}^eps and write them with
    /// metadata sidecars.
    Basis {
        /// Half-integer weight, e.g. 1/2, 1, 3/2 (or use --d)
        #[arg(long)]
        k: Option<String>,
        /// Dimension d = 2k
        #[arg(long)]
        d: Option<u32>,
        /// Restrict to one sign (+1 or -1); default builds both
        #[arg(long = "eps-sign")]
        eps_sign: Option<String>,
        /// Top coefficient index; omitting it requests an empty range
        #[arg(long = "n-max")]
        n_max: Option<usize>,
        /// Radial grid as MAX:POINTS (quadratically graded), default 8:400
        #[arg(long)]
        grid: Option<String>,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Tolerance scale applied to the quadrature target
        #[arg(long = "tol-scale", default_value_t = 1.0)]
        tol_scale: f64,
    },
    /// Run the verification suites and report each check.
    Verify {
        /// Substring filter selecting checks
        #[arg(long)]
        suite: Option<String>,
        /// Multiply every tolerance by this factor
        #[arg(long = "tol-scale", default_value_t = 1.0)]
        tol_scale: f64,
        /// Verify existing table files in a directory instead of fresh ones
        #[arg(long)]
        tables: Option<PathBuf>,
        /// Report output directory (report always printed to stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a function from perturbed-node data (constructive
    /// radial theorem).
    Reconstruct {
        /// Perturbation profile file
        #[arg(long)]
        profile: PathBuf,
        /// Node data file; a self-dual Gaussian is sampled when omitted
        #[arg(long)]
        data: Option<PathBuf>,
        /// Top series index (default: profile length)
        #[arg(long = "n-max")]
        n_max: Option<usize>,
        /// Radial grid as MAX:POINTS
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "tol-scale", default_value_t = 1.0)]
        tol_scale: f64,
    },
    /// Run the hyperbola uniqueness pipeline on cross data.
    Hup {
        /// Perturbation profile file (d = 4 shape, eps_0 = 0)
        #[arg(long)]
        profile: PathBuf,
        /// Cross data file; sampled honestly from the built-in odd density
        /// when omitted
        #[arg(long)]
        cross: Option<PathBuf>,
        #[arg(long = "n-max")]
        n_max: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Measure decay bounds of the coefficient families against the
    /// polynomial shape and fit exponential rates.
    Bounds {
        /// Half-integer weight
        #[arg(long)]
        k: String,
        /// Decay rate beta >= 2k + 2
        #[arg(long)]
        beta: f64,
        #[arg(long = "n-max", default_value_t = 10)]
        n_max: usize,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Parse(_) | Error::Io(_) | Error::GridMismatch(_) => 2,
        Error::BudgetExceeded(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("FOURIER_INTERP_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Basis {
            k,
            d,
            eps_sign,
            n_max,
            grid,
            out,
            tol_scale,
        } => commands::cmd_basis(k, d, eps_sign, n_max, grid, out, tol_scale),
        Command::Verify {
            suite,
            tol_scale,
            tables,
            out,
        } => commands::cmd_verify(suite, tol_scale, tables, out),
        Command::Reconstruct {
            profile,
            data,
            n_max,
            grid,
            out,
            tol_scale,
        } => commands::cmd_reconstruct(profile, data, n_max, grid, out, tol_scale),
        Command::Hup {
            profile,
            cross,
            n_max,
            out,
        } => commands::cmd_hup(profile, cross, n_max, out),
        Command::Bounds {
            k,
            beta,
            n_max,
            grid,
            out,
        } => commands::cmd_bounds(k, beta, n_max, grid, out),
    };
    match outcome {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
