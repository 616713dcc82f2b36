//! Reproducible experiment harness over the core library. Every command
//! emits deterministic CSV data files plus a JSON summary echoing the full
//! effective configuration; the exit status is zero exactly when all
//! embedded assertions pass.
//!
//! Defaults for parameters nothing pins externally (grids, trial counts,
//! probe geometry) are centralized in each command's `resolve` block and
//! echoed verbatim into the report, so a summary file always documents the
//! run that produced it.

mod commands;
mod config;
mod report;
mod util;

use clap::{Parser, Subcommand};
use config::FileConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "hopfcole",
    about = "Closed-form experiments for log-sum-exp layers as heat-kernel solutions",
    version
)]
struct Cli {
    /// Seed for every random draw in the run (printed and echoed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV data and the JSON summary.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Optional key=value config file; flags override file entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Identity, attention, and transformer-block verification tables.
    Verify(commands::verify::VerifyArgs),
    /// Convergence curves against the dense continuum reference.
    Quadrature(commands::quadrature::QuadratureArgs),
    /// Power-law fits and intrinsic-dimension conversions.
    Scaling(commands::scaling::ScalingArgs),
    /// Curvature bounds, certificates, and near-shock scaling.
    Robustness(commands::robustness::RobustnessArgs),
    /// Entropy-landscape critical points across temperature.
    Bifurcation(commands::bifurcation::BifurcationArgs),
    /// Closed-form influence quantities against finite differences.
    Attribution(commands::attribution::AttributionArgs),
    /// Forward-Euler trajectories and the reverse co-state recurrence.
    Characteristics(commands::characteristics::CharacteristicsArgs),
    /// Tau-function residuals and the solution identity.
    Integrable(commands::integrable::IntegrableArgs),
}

fn main() {
    let cli = Cli::parse();
    let file = match FileConfig::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let seed = match file.resolve("seed", cli.seed, 42u64) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let out = cli.out.unwrap_or_else(|| PathBuf::from("out"));
    println!("seed {seed}, output directory {}", out.display());

    let result = match &cli.command {
        Command::Verify(args) => commands::verify::run(seed, &out, &file, args),
        Command::Quadrature(args) => commands::quadrature::run(seed, &out, &file, args),
        Command::Scaling(args) => commands::scaling::run(seed, &out, &file, args),
        Command::Robustness(args) => commands::robustness::run(seed, &out, &file, args),
        Command::Bifurcation(args) => commands::bifurcation::run(seed, &out, &file, args),
        Command::Attribution(args) => commands::attribution::run(seed, &out, &file, args),
        Command::Characteristics(args) => commands::characteristics::run(seed, &out, &file, args),
        Command::Integrable(args) => commands::integrable::run(seed, &out, &file, args),
    };

    match result {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("one or more assertions failed; see the summary JSON for the rows");
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
