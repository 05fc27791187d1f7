use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wipcrit_cli::{cmd_classify, cmd_donsker, cmd_estimate, cmd_sweep_k, cmd_verify_projections, RunConfig};

/// Projective criteria for the weak invariance principle: series
/// classification, exact projections, Monte-Carlo estimates and a Donsker check.
#[derive(Parser)]
#[command(name = "wipcrit", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Series verdicts for the four criteria.
    Classify(RunConfig),
    /// Exact projector against state-space enumeration on a tiny model.
    VerifyProjections(RunConfig),
    /// Direct evaluation of the criteria, reconciled with the series.
    Estimate(RunConfig),
    /// Normalized partial-sum paths, KS and covariance checks.
    Donsker(RunConfig),
    /// Classification over K = 4..=k_max.
    SweepK(RunConfig),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, flags): (fn(RunConfig) -> _, RunConfig) = match cli.verb {
        Verb::Classify(c) => (cmd_classify, c),
        Verb::VerifyProjections(c) => (cmd_verify_projections, c),
        Verb::Estimate(c) => (cmd_estimate, c),
        Verb::Donsker(c) => (cmd_donsker, c),
        Verb::SweepK(c) => (cmd_sweep_k, c),
    };
    let outcome = RunConfig::from_flags(flags).and_then(run);
    match outcome {
        Ok(o) => {
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            for line in &o.failures {
                eprintln!("FAILED {line}");
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
