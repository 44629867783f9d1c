use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nsopt_harness::config::Config;
use nsopt_harness::experiment::Experiment;
use nsopt_harness::{check, report, resolve_out_dir};

/// Solvers and experiments for constrained nested stochastic
/// optimization.
#[derive(Parser)]
#[command(name = "nsopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the flat key-value config file.
        #[arg(long)]
        config: PathBuf,
        /// Worker threads across (N, seed) cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (falls back to config `output.dir`, then
        /// the NSOPT_OUT environment variable, then ./runs).
        #[arg(long)]
        out: Option<String>,
    },
    /// Run the verification suite (geometry properties, chain-rule
    /// gradients, descent ledger, schedule checks).
    Check {
        /// Corpus seed.
        #[arg(long, default_value_t = 5)]
        seed: u64,
    },
    /// Sweep horizons and seeds on a noisy benchmark and fit the
    /// convergence slope.
    Sweep {
        /// Comma-separated iteration counts.
        #[arg(long, default_value = "100,1000,10000")]
        n: String,
        /// Replications per horizon.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Problem: quadratic | svi | policy_eval | low_rank | single_level.
        #[arg(long, default_value = "quadratic")]
        problem: String,
        /// Solver: nasa | asa.
        #[arg(long, default_value = "nasa")]
        solver: String,
        /// Oracle noise level.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Base seed for the run streams.
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<String>,
    },
}

fn run_experiment_to(
    cfg: Config,
    jobs: usize,
    out_flag: Option<&str>,
) -> Result<bool, nsopt_harness::HarnessError> {
    let out_dir = resolve_out_dir(out_flag, cfg.optional("output.dir"));
    let experiment = Experiment::from_config(&cfg)?;
    let output = experiment.run(jobs);
    report::write_artifacts(&experiment, &output, &out_dir)?;
    println!(
        "{} cells ({} failed) -> {}",
        output.records.len() + output.failures.len(),
        output.failures.len(),
        out_dir.display()
    );
    for aggregate in &output.aggregates {
        println!(
            "N={:<8} mean_V={:.6e} stderr_V={:.2e} mean_g_gap_sq={:.6e}",
            aggregate.iterations, aggregate.mean_v, aggregate.stderr_v, aggregate.mean_g_gap_sq
        );
    }
    if output.aggregates.len() >= 3 {
        let pts: Vec<(f64, f64)> = output
            .aggregates
            .iter()
            .map(|a| (a.iterations as f64, a.mean_v))
            .collect();
        if let Ok(slope) = nsopt::diagnostics::slope_estimate(&pts) {
            println!("fitted slope of log mean_V vs log N: {slope:+.4}");
        }
    }
    for failure in &output.failures {
        eprintln!("cell failed: {failure}");
    }
    Ok(output.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, jobs, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            Config::parse(&text).and_then(|cfg| run_experiment_to(cfg, jobs, out.as_deref()))
        }
        Command::Check { seed } => {
            let reports = check::run_all(seed);
            let mut all_pass = true;
            for r in &reports {
                println!("{}: {} ({})", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                all_pass &= r.pass;
            }
            Ok(all_pass)
        }
        Command::Sweep {
            n,
            seeds,
            problem,
            solver,
            noise,
            base_seed,
            jobs,
            out,
        } => {
            let pairs = [
                ("problem.name", problem),
                ("problem.noise", format!("{noise}")),
                ("solver.name", solver),
                ("run.n_list", n),
                ("run.seeds", format!("{seeds}")),
                ("run.base_seed", format!("{base_seed}")),
            ];
            let cfg = Config::from_pairs(&pairs);
            run_experiment_to(cfg, jobs, out.as_deref())
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
