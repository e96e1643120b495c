use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fene_harness::{emit_reports, load_config, run_experiment, ExperimentKind, HarnessError};

#[derive(Parser)]
#[command(name = "fene", version, about = "Compressible FENE dumbbell experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the coupled system and record energy traces.
    Simulate(Args),
    /// Eigenvalues of the linearized mode operators.
    Spectrum(Args),
    /// Decay and size of the solution across viscosities.
    SweepNu(Args),
    /// Distance to the incompressible limit across viscosities.
    LimitCompare(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment spec in TOML.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` of the spec.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "FENE_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Overrides `base.seed` of the spec.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(kind: ExperimentKind, args: &Args) -> Result<bool, HarnessError> {
    let mut spec = load_config(&args.config)?;
    if spec.kind != kind {
        return Err(fene_harness::ConfigError::Invalid(format!(
            "spec kind {} does not match subcommand {}",
            spec.kind.name(),
            kind.name()
        ))
        .into());
    }
    if let Some(out) = &args.out {
        spec.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        spec.base.seed = seed;
    }
    let report = run_experiment(&spec, args.workers)?;
    let command: Vec<String> = std::env::args().collect();
    emit_reports(&report, &spec.output_dir, &command)?;
    for c in &report.checks {
        println!("{} {} = {:.6e} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::SweepNu(a) => (ExperimentKind::SweepNu, a),
        Command::LimitCompare(a) => (ExperimentKind::LimitCompare, a),
    };
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
