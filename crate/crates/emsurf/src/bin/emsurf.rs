//! Thin command-line driver: config-driven solves, config validation, and
//! the built-in validation suites. All substance lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emsurf::config::RunConfig;
use emsurf::runner::{run_selftest, run_solve, validate_run, SelftestTier};

#[derive(Parser)]
#[command(
    name = "emsurf",
    about = "Surface-integral-equation solver for planar arrays of scatterer cells",
    version
)]
struct Cli {
    /// Worker threads for parallel phases (default: all cores; 1 gives
    /// bitwise-reproducible reports).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for cached macromodels (reused across runs).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured run and write the report and far-field cuts.
    Solve {
        /// Path to a TOML run configuration.
        config: PathBuf,
    },
    /// Run the built-in validation suite (fast: algebraic oracles in
    /// seconds; full: adds scattering and equivalence fixtures).
    Selftest {
        #[arg(default_value = "fast")]
        tier: String,
    },
    /// Check a configuration and its geometry without assembling operators.
    Validate {
        /// Path to a TOML run configuration.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let cache_dir = cli.cache_dir.as_deref();
    match cli.command {
        Command::Solve { config } => match RunConfig::from_file(&config).and_then(|cfg| run_solve(&cfg, cache_dir)) {
            Ok(outcome) => {
                print!("{}", outcome.report_text);
                if let Some(p) = &outcome.report_path {
                    println!("report written to {}", p.display());
                }
                for p in &outcome.cut_paths {
                    println!("cut written to {}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Selftest { tier } => {
            let tier: SelftestTier = match tier.parse() {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let results = run_selftest(tier);
            let mut all_passed = true;
            for r in &results {
                println!("{} {} — {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                all_passed &= r.passed;
            }
            if all_passed {
                println!("{} checks passed", results.len());
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Validate { config } => {
            match RunConfig::from_file(&config).and_then(|cfg| validate_run(&cfg)) {
                Ok(summary) => {
                    print!("{summary}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
