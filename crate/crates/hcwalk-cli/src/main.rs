//! Command-line driver: validate environments, solve effective models,
//! simulate both processes, and compare their statistics.

mod commands;
mod manifest;
mod model_doc;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, CompareArgs, SimulateArgs};

#[derive(Parser)]
#[command(
    name = "hcwalk",
    version,
    about = "Effective limit models of random walks in high-contrast periodic environments"
)]
struct Cli {
    /// Worker threads for Monte Carlo runs (0 = rayon default). Results are
    /// identical for every worker count.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an environment file against every structural invariant.
    Validate {
        /// Environment JSON file.
        #[arg(long)]
        env: PathBuf,
    },
    /// Solve the corrector problems and write the effective model.
    Solve {
        #[arg(long)]
        env: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Largest acceptable corrector residual (sup norm).
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    /// Sample trajectories of the microscale walk or the limit process.
    Simulate {
        #[arg(long)]
        env: PathBuf,
        /// Reuse a solved model document instead of solving in-process
        /// (limit runs only).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Which process to sample: micro | limit.
        #[arg(long, default_value = "micro")]
        kind: String,
        /// Contrast parameters (micro runs), comma separated.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Time horizon.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Number of sampled paths.
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output grid size for limit trajectories.
        #[arg(long, default_value_t = 128)]
        grid: usize,
        /// How many full trajectories to write (CSV can get large).
        #[arg(long, default_value_t = 0)]
        traj: usize,
        /// Start cell, comma-separated lattice coordinates (defaults to the
        /// base fast cell).
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare microscale and limit expectations over a grid of test
    /// functions, times, and contrasts.
    Compare {
        #[arg(long)]
        env: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.2, 0.1])]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5])]
        t: Vec<f64>,
        #[arg(long, default_value_t = 20000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Test-function families: gaussian, cosine.
        #[arg(long, value_delimiter = ',', default_values_t = ["gaussian".to_string()])]
        fns: Vec<String>,
        /// Largest lattice-site count for the exact semigroup route.
        #[arg(long, default_value_t = 2_000_000)]
        budget: usize,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretty-print a comparison report.
    Report {
        /// report.json produced by `compare`.
        #[arg(long)]
        report: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { env } => commands::run_validate(&env),
        Command::Solve {
            env,
            out,
            tolerance,
        } => commands::run_solve(&env, &out, tolerance),
        Command::Simulate {
            env,
            model,
            kind,
            eps,
            t,
            paths,
            seed,
            grid,
            traj,
            start,
            out,
        } => {
            let start = start
                .map(|s| commands::parse_lattice_point(&s))
                .transpose()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            commands::run_simulate(&SimulateArgs {
                env_path: env,
                model_path: model,
                kind,
                eps_list: eps,
                t_final: t,
                n_paths: paths,
                seed,
                grid_points: grid,
                n_trajectories: traj,
                start,
                out,
            })
        }
        Command::Compare {
            env,
            eps,
            t,
            paths,
            seed,
            fns,
            budget,
            start,
            out,
        } => {
            let start = start
                .map(|s| commands::parse_lattice_point(&s))
                .transpose()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            commands::run_compare(&CompareArgs {
                env_path: env,
                eps_list: eps,
                t_list: t,
                n_paths: paths,
                seed,
                fns,
                window_budget: budget,
                start,
                out,
            })
        }
        Command::Report { report } => commands::run_report(&report),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers;
    let result = if workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(CliError::Validation(format!("building thread pool: {e}"))),
        }
    } else {
        dispatch(cli)
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}
