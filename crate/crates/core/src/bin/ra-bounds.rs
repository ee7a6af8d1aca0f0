use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ra_bounds::config::{parse_config_file, render_csv, run_cases, Overrides};
use ra_bounds::marginals::DEFAULT_TAIL_MASS;

/// Bounds on E[g(h(X))] over all dependence structures with fixed marginals.
#[derive(Debug, Parser)]
#[command(name = "ra-bounds", version)]
struct Cli {
    /// Run configuration file.
    config: PathBuf,
    /// Write the CSV report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the exhaustive oracle on every case that fits its budget.
    #[arg(long)]
    oracle: bool,
    /// Seed for every case, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep limit for every case, overriding the configuration.
    #[arg(long)]
    max_sweeps: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match parse_config_file(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    config.apply(&Overrides {
        seed: cli.seed,
        max_sweeps: cli.max_sweeps,
        force_oracle: cli.oracle,
    });

    let rows = run_cases(&config);
    let csv = render_csv(&rows);
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &csv) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{csv}"),
    }

    let truncated = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .any(|o| o.bounds.any_truncated());
    if truncated {
        eprintln!(
            "note: unbounded marginals were truncated; default tail mass is {DEFAULT_TAIL_MASS:e} per unbounded side"
        );
    }
    let failures: Vec<_> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(|e| (&r.id, e)))
        .collect();
    for (id, err) in &failures {
        eprintln!("case {id}: {err}");
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
