//! Command-line entry point.
//!
//! Exit codes are part of the contract: 0 on success, 2 when a run or a
//! validation check fails, 3 when the scenario cannot be loaded or is
//! invalid.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qpf_harness::comparison::{run_comparison, ComparisonReport};
use qpf_harness::convergence::{parse_orders, run_convergence};
use qpf_harness::error::Result;
use qpf_harness::expand::render_expansion;
use qpf_harness::report::{emit_comparison, emit_convergence};
use qpf_harness::scenario::{load_scenario, parse_filter_names, Scenario};
use qpf_harness::validate::run_validate;

#[derive(Parser)]
#[command(
    name = "qpf",
    version,
    about = "Projection-filter laboratory for continuously monitored quantum systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare filter variants against the reference filter over Monte Carlo paths
    Compare {
        /// Scenario file, or a bundled name (four_level, four_level_selfadjoint)
        #[arg(long, default_value = "four_level")]
        config: String,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario path count
        #[arg(long)]
        paths: Option<usize>,
        /// Output directory for comparison.csv, comparison.svg, manifest.json
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated variants overriding the scenario (new, old, ito, selfadjoint)
        #[arg(long)]
        filters: Option<String>,
    },
    /// Measure strong convergence of the truncated expansions
    Convergence {
        /// Scenario file, or a bundled name
        #[arg(long, default_value = "four_level")]
        config: String,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario path count
        #[arg(long)]
        paths: Option<usize>,
        /// Output directory for convergence.csv, convergence.svg, manifest.json
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated truncation orders
        #[arg(long, default_value = "1,2")]
        order: String,
    },
    /// Run the validation suite, one line per check
    Validate,
    /// Print one stochastic Taylor expansion as a table
    Expand {
        /// Scenario file, or a bundled name
        #[arg(long, default_value = "four_level")]
        config: String,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        /// Truncation order
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Expansion horizon; defaults to the scenario's filter step
        #[arg(long)]
        delta: Option<f64>,
        /// Which noise path to expand
        #[arg(long, default_value_t = 0)]
        path_id: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code())
        }
    }
}

fn apply_overrides(scenario: &mut Scenario, seed: Option<u64>, paths: Option<usize>) {
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(paths) = paths {
        scenario.paths = paths.max(1);
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Compare {
            config,
            seed,
            paths,
            out,
            filters,
        } => {
            let mut scenario = load_scenario(&config)?;
            apply_overrides(&mut scenario, seed, paths);
            if let Some(list) = filters {
                let names: Vec<String> =
                    list.split(',').map(|s| s.trim().to_string()).collect();
                scenario.filters = parse_filter_names(&names)?;
            }
            let report = run_comparison(&scenario)?;
            emit_comparison(&scenario, &report, &out)?;
            print_comparison_summary(&scenario, &report, &out);
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence {
            config,
            seed,
            paths,
            out,
            order,
        } => {
            let mut scenario = load_scenario(&config)?;
            apply_overrides(&mut scenario, seed, paths);
            let orders = parse_orders(&order)?;
            let reports = run_convergence(&scenario, &orders)?;
            emit_convergence(&scenario, &reports, &out)?;
            for report in &reports {
                let slope = report
                    .slope
                    .map(|s| format!("{s:.3}"))
                    .unwrap_or_else(|| "n/a".to_string());
                println!(
                    "order {}: fitted mean-square slope {slope} over {} paths",
                    report.order, report.paths
                );
            }
            println!("wrote {}", out.join("convergence.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate => {
            let outcomes = run_validate();
            let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
            let mut all_passed = true;
            for outcome in &outcomes {
                let status = if outcome.passed { "PASS" } else { "FAIL" };
                println!("{status} {:<width$}  {}", outcome.name, outcome.detail);
                all_passed &= outcome.passed;
            }
            if all_passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Expand {
            config,
            seed,
            order,
            delta,
            path_id,
        } => {
            let mut scenario = load_scenario(&config)?;
            apply_overrides(&mut scenario, seed, None);
            let delta = delta.unwrap_or_else(|| scenario.integrator_step());
            let table = render_expansion(&scenario, order, delta, path_id)?;
            print!("{table}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_comparison_summary(scenario: &Scenario, report: &ComparisonReport, out: &Path) {
    println!(
        "scenario {}: {} paths kept, {} excluded",
        scenario.name,
        report.accepted.len(),
        report.failures.len()
    );
    for (v, &variant) in report.variants.iter().enumerate() {
        println!(
            "  {}: time-averaged distance {:.6e}",
            variant.label(),
            report.time_averaged_mean[v]
        );
    }
    if let Some(rate) = report.win_rate {
        println!(
            "  corrected filter beats the baseline on {:.1}% of paths",
            100.0 * rate
        );
    }
    println!(
        "  reference positivity: smallest eigenvalue {:.3e}, {} recorded states below the -1.0e-8 floor",
        report.worst_eigenvalue, report.floor_violations
    );
    println!("wrote {}", out.join("comparison.csv").display());
}
