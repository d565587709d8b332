//! `linfvar`: solve, sweep and verify second-order L^∞ variational problems.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes shared by every subcommand.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const SOLVER: u8 = 3;
    pub const FAIL: u8 = 4;
    pub const INCONCLUSIVE: u8 = 5;
}

#[derive(Parser)]
#[command(name = "linfvar", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for probe families (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated exponents (overrides the schedule ladder).
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
    /// Also write the field of every stage.
    #[arg(long)]
    pub emit_fields: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the p-continuation and certify the final stage.
    Solve(Common),
    /// Run the p-continuation and write one CSV row per stage.
    Sweep(Common),
    /// Certify a given pair of fields.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Candidate minimizer, as written by `solve`.
        #[arg(long)]
        u: PathBuf,
        /// Dual field.
        #[arg(long)]
        f: PathBuf,
    },
    /// Solve the dual equation for a given field.
    Dual {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        u: PathBuf,
    },
    /// Closed-form 1D solution for `F = ξ`: `a b u(a) u'(a) u(b) u'(b)`.
    #[command(allow_negative_numbers = true)]
    Oracle {
        #[arg(num_args = 6, required = true)]
        data: Vec<f64>,
        /// Also write `oracle.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled convexity certificate and assumption checks for the
    /// configured supremand.
    Convexity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64,128,256")]
        candidates: Vec<f64>,
        /// Lattice points per axis.
        #[arg(long, default_value_t = 5)]
        density: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(c) => commands::solve(&c),
        Command::Sweep(c) => commands::sweep(&c),
        Command::Verify { common, u, f } => commands::verify(&common, &u, &f),
        Command::Dual { common, u } => commands::dual(&common, &u),
        Command::Oracle { data, out } => commands::oracle(&data, out.as_deref()),
        Command::Convexity {
            common,
            candidates,
            density,
        } => commands::convexity(&common, &candidates, density),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
