use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alpha_harmonic::lab::{run, Experiment, RunOptions};

#[derive(Parser)]
#[command(name = "ahlab", version, about = "Experiments on α-harmonic maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Multiplies every pass/fail tolerance
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    Energy(Common),
    Tension(Common),
    AuditConformal(Common),
    Nonexistence(Common),
    Index(Common),
    Spectrum(Common),
    PhaseDiagram(Common),
    Flow(Common),
    AuditAll(Common),
    /// Run the experiment named in the config
    Run(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Energy(c) => (Some(Experiment::Energy), c),
        Command::Tension(c) => (Some(Experiment::Tension), c),
        Command::AuditConformal(c) => (Some(Experiment::AuditConformal), c),
        Command::Nonexistence(c) => (Some(Experiment::Nonexistence), c),
        Command::Index(c) => (Some(Experiment::Index), c),
        Command::Spectrum(c) => (Some(Experiment::Spectrum), c),
        Command::PhaseDiagram(c) => (Some(Experiment::PhaseDiagram), c),
        Command::Flow(c) => (Some(Experiment::Flow), c),
        Command::AuditAll(c) => (Some(Experiment::AuditAll), c),
        Command::Run(c) => (None, c),
    };
    let opts = RunOptions {
        out_dir: common.out_dir,
        seed: common.seed,
        threads: common.threads,
        tol_scale: common.tol_scale,
        experiment,
        ..RunOptions::default()
    };
    match run(common.config.as_deref(), &opts) {
        Ok(manifest) => {
            for o in &manifest.outputs {
                println!("wrote {}", opts.out_dir.join(&o.path).display());
            }
            for c in &manifest.conflicts {
                println!("conflict: {c}");
            }
            for f in &manifest.failures {
                eprintln!("FAILED: {f}");
            }
            if manifest.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
