//! `fraccond`: runs one experiment from a TOML config and writes
//! `report.json` plus CSV and binary artifacts.
//!
//! Exit status: 0 when every criterion passes, 1 when one fails or the
//! experiment errors, 2 when the config cannot be loaded.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::Config;
use experiments::Experiment;
use report::{Findings, Report};

#[derive(Debug, Parser)]
#[command(
    name = "fraccond",
    version,
    about = "Fractional conductivity experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward Dirichlet solve with random data on W1.
    Solve(RunArgs),
    /// Full exterior DN matrix.
    Dn(RunArgs),
    /// Liouville, correspondence, DN symmetry and Alessandrini checks.
    Verify(RunArgs),
    /// Exterior determination trace at a window point.
    Reconstruct(RunArgs),
    /// Window stability inequality for two conductivities.
    Stability(RunArgs),
    /// Build and verify the partial-data counterexample.
    Counterexample(RunArgs),
    /// Kernel convergence study against the closed-form profile.
    Converge(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all pools are bounded by this.
    #[arg(long)]
    threads: Option<usize>,
    /// Single worker thread. Summation order is fixed in any case.
    #[arg(long)]
    deterministic: bool,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Solve(a) => (Experiment::Solve, a),
            Command::Dn(a) => (Experiment::Dn, a),
            Command::Verify(a) => (Experiment::Verify, a),
            Command::Reconstruct(a) => (Experiment::Reconstruct, a),
            Command::Stability(a) => (Experiment::Stability, a),
            Command::Counterexample(a) => (Experiment::Counterexample, a),
            Command::Converge(a) => (Experiment::Converge, a),
        }
    }
}

fn main() -> ExitCode {
    let (experiment, args) = Cli::parse().command.split();
    let cfg = match Config::load(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let threads = if args.deterministic {
        Some(1)
    } else {
        args.threads
    };
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let out = args
        .out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: creating {}: {e}", out.display());
        return ExitCode::from(2);
    }

    let start = Instant::now();
    let mut found = Findings::default();
    let error = experiments::run(experiment, &cfg, &out, &mut found)
        .err()
        .map(|e| format!("{e:#}"));
    let report = Report {
        name: cfg.name.clone(),
        experiment: experiment.name().to_string(),
        params_hash: cfg.params_hash(),
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        deterministic: args.deterministic,
        passed: error.is_none() && found.criteria.iter().all(|c| c.passed),
        criteria: found.criteria,
        metrics: found.metrics,
        notes: found.notes,
        error,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: found.artifacts,
        config: cfg,
    };

    for c in &report.criteria {
        println!(
            "{} {}: {:.3e} {} {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.comparison,
            c.threshold
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    if let Some(e) = &report.error {
        println!("FAIL {}: {e}", report.experiment);
    }
    match report.write(&out) {
        Ok(path) => println!("report: {}", path.display()),
        Err(e) => {
            eprintln!("error: writing report: {e:#}");
            return ExitCode::FAILURE;
        }
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
