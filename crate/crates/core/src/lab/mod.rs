//! Scenario runner: configuration, experiments and output files.

mod audit;
pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use audit::audit_all;
pub use config::{Experiment, ScenarioConfig};
pub use experiments::{phase_cell, ExperimentOutput, PhaseCell, Thresholds};
pub use output::{Cell, Checkpoint, PlotData, RunManifest, Table};

use crate::error::{Error, Result};
use output::{sha256_hex, write_manifest, write_output};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Worker threads (0 = rayon default).
    pub threads: usize,
    pub tol_scale: f64,
    /// Overrides the config experiment.
    pub experiment: Option<Experiment>,
    /// Directory that relative paths in the config refer to.
    pub base_dir: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            seed: None,
            threads: 0,
            tol_scale: 1.0,
            experiment: None,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Runs one experiment without touching the file system.
pub fn execute(cfg: &ScenarioConfig, experiment: Experiment, opts: &RunOptions) -> Result<ExperimentOutput> {
    let th = Thresholds::new(cfg, opts.tol_scale);
    match experiment {
        Experiment::Energy => experiments::energy(cfg),
        Experiment::Tension => experiments::tension(cfg, &th),
        Experiment::AuditConformal => experiments::audit_conformal(cfg, &th),
        Experiment::Nonexistence => experiments::nonexistence(cfg, &th),
        Experiment::Index => experiments::index(cfg),
        Experiment::Spectrum => experiments::spectrum(cfg),
        Experiment::PhaseDiagram => experiments::phase_diagram(cfg),
        Experiment::Flow => experiments::flow_experiment(cfg, &opts.base_dir),
        Experiment::AuditAll => audit_all(&th, cfg.degree),
    }
}

/// Runs a parsed scenario and writes CSV tables, plot data, extra files and
/// `manifest.json` into `opts.out_dir`.
pub fn run_config(mut cfg: ScenarioConfig, config_text: &str, opts: &RunOptions) -> Result<RunManifest> {
    if opts.seed.is_some() {
        cfg.seed = opts.seed;
    }
    let experiment = opts.experiment.or(cfg.experiment).ok_or_else(|| Error::Config {
        path: "experiment".into(),
        message: "no experiment given in the config or on the command line".into(),
    })?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let result = pool.install(|| execute(&cfg, experiment, opts))?;

    let mut outputs = Vec::new();
    for t in &result.tables {
        outputs.push(write_output(&opts.out_dir, &format!("{}.csv", t.name), &t.to_csv()?)?);
    }
    for p in &result.plots {
        outputs.push(write_output(&opts.out_dir, &format!("{}.csv", p.name), &p.to_table().to_csv()?)?);
    }
    for (name, bytes) in &result.files {
        outputs.push(write_output(&opts.out_dir, name, bytes)?);
    }
    let manifest = RunManifest {
        experiment: experiment.name().into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_unix,
        wall_time_s: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
        threads,
        tol_scale: opts.tol_scale,
        outputs,
        conflicts: result.conflicts,
        failures: result.failures,
    };
    write_manifest(&opts.out_dir, &manifest)?;
    Ok(manifest)
}

/// Loads a config file (or uses defaults when `path` is `None`) and runs it.
pub fn run(path: Option<&Path>, opts: &RunOptions) -> Result<RunManifest> {
    let (cfg, text) = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => (ScenarioConfig::default(), String::new()),
    };
    let mut opts = opts.clone();
    if let Some(dir) = path.and_then(Path::parent) {
        opts.base_dir = dir.to_path_buf();
    }
    run_config(cfg, &text, &opts)
}
