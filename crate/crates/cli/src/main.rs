//! `adkit` — correctness checks, benchmarks and sparsity-pattern export for
//! the differentiation backends.
//!
//! Exit codes: 0 on success, 1 on a correctness failure, 2 on a
//! configuration error.

use adkit_core::alloccount::CountingAllocator;
use adkit_harness::{
    build_scenario, checks_to_table, default_size, records_to_csv, records_to_markdown,
    rejoin_backend_args, run_checks, run_suite, BenchConfig, CheckStatus, HarnessError,
    PreparedMode, SuiteConfig,
};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

// counted allocations back the `allocs` column of the benchmark reports
#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

#[derive(Parser)]
#[command(
    name = "adkit",
    about = "Backend-agnostic differentiation: benchmark, check, and inspect",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Selection {
    /// Scenario names (comma separated) or `all`
    #[arg(long, value_delimiter = ',', default_value = "all")]
    scenarios: Vec<String>,

    /// Backend ids: dual, tape, fd, secondorder(a,b), sparse(a), mixed(a,b)
    #[arg(long, value_delimiter = ',', default_value = "dual,tape,fd")]
    backends: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Time prepared and unprepared execution over a scenario cross-product
    Bench {
        #[command(flatten)]
        selection: Selection,

        /// Input sizes (comma separated); per-scenario defaults when omitted
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,

        /// Which preparation modes to time
        #[arg(long, default_value = "both")]
        prepared: PreparedMode,

        /// CSV output path
        #[arg(long)]
        out: PathBuf,

        /// Optional markdown table output path
        #[arg(long)]
        markdown: Option<PathBuf>,

        /// Samples per cell (stops earlier if the budget runs out)
        #[arg(long, default_value_t = 100)]
        samples: usize,

        /// Time budget per cell in milliseconds
        #[arg(long = "budget-ms", default_value_t = 1000)]
        budget_ms: u64,

        /// Correctness tolerance override (per-backend default otherwise)
        #[arg(long)]
        tol: Option<f64>,

        /// Run cells in parallel (off by default: timing contention)
        #[arg(long)]
        parallel: bool,

        /// Deliberately corrupt every reference value (testing hook)
        #[arg(long, hide = true)]
        corrupt_references: bool,
    },

    /// Check derivative correctness of every operator variant per backend
    Check {
        #[command(flatten)]
        selection: Selection,

        /// Absolute tolerance (defaults: 1e-8 for AD backends, 1e-4 for fd)
        #[arg(long)]
        tol: Option<f64>,

        /// Run cells in parallel
        #[arg(long)]
        parallel: bool,
    },

    /// Write a scenario's sparsity pattern in the plain-text format
    Pattern {
        /// Scenario name
        #[arg(long)]
        scenario: String,

        /// Input size (scenario default when omitted)
        #[arg(long)]
        size: Option<usize>,

        /// Output path
        #[arg(long)]
        out: PathBuf,
    },
}

fn config_error(err: &HarnessError) -> ExitCode {
    eprintln!("adkit: {err}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Bench {
            selection,
            sizes,
            prepared,
            out,
            markdown,
            samples,
            budget_ms,
            tol,
            parallel,
            corrupt_references,
        } => {
            let cfg = SuiteConfig {
                scenarios: selection.scenarios,
                backends: rejoin_backend_args(&selection.backends),
                sizes,
                prepared,
                bench: BenchConfig {
                    max_samples: samples,
                    budget: Duration::from_millis(budget_ms),
                    warmup: 3,
                    tolerance: tol,
                },
                corrupt_references,
                parallel,
            };
            let outcome = match run_suite(&cfg) {
                Ok(outcome) => outcome,
                Err(err) => return config_error(&err),
            };
            let csv = records_to_csv(&outcome.records);
            if let Err(err) = std::fs::write(&out, &csv) {
                return config_error(&err.into());
            }
            if let Some(md_path) = markdown {
                let md = records_to_markdown(&outcome.records);
                if let Err(err) = std::fs::write(&md_path, md) {
                    return config_error(&err.into());
                }
            }
            println!("{}", records_to_markdown(&outcome.records));
            println!("wrote {} rows to {}", outcome.records.len(), out.display());
            if outcome.any_failure {
                eprintln!("adkit: correctness failure in at least one benchmark cell");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Check {
            selection,
            tol,
            parallel,
        } => {
            let backends = rejoin_backend_args(&selection.backends);
            let reports = match run_checks(&selection.scenarios, &backends, tol, parallel) {
                Ok(reports) => reports,
                Err(err) => return config_error(&err),
            };
            print!("{}", checks_to_table(&reports));
            let failures = reports
                .iter()
                .filter(|r| r.status == CheckStatus::Fail)
                .count();
            let skips = reports
                .iter()
                .filter(|r| matches!(r.status, CheckStatus::Skip(_)))
                .count();
            println!(
                "{} checks: {} passed, {failures} failed, {skips} skipped",
                reports.len(),
                reports.len() - failures - skips
            );
            if failures > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Pattern { scenario, size, out } => {
            let size = size.unwrap_or_else(|| default_size(&scenario));
            let runnable = match build_scenario(&scenario, size) {
                Ok(s) => s,
                Err(err) => return config_error(&err),
            };
            let text = runnable.pattern_text();
            if let Err(err) = std::fs::write(&out, text) {
                return config_error(&err.into());
            }
            println!(
                "wrote pattern for `{scenario}` (size {size}) to {}",
                out.display()
            );
            ExitCode::SUCCESS
        }
    }
}
