mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use serde::Serialize;

use config::{ConfigError, Experiment, FileConfig, Overrides, Resolved};
use experiments::RunRecord;
use output::OutputDir;

/// Runs one cross-diffusion experiment and writes its results under
/// `<out>/<experiment>/`.
#[derive(Debug, Parser)]
#[command(name = "crossdiff", version)]
struct Cli {
    experiment: Experiment,
    /// TOML file with experiment settings.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Comma-separated list of coupling strengths.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_name = "J")]
    cells: Option<usize>,
    #[arg(long, value_name = "T")]
    horizon: Option<f64>,
    #[arg(long, value_name = "M")]
    samples: Option<usize>,
    /// Output root; defaults to $CROSSDIFF_OUT, then `results`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    config: &'a Resolved,
    runs: &'a [RunRecord],
    files: Vec<String>,
}

fn resolve(cli: Cli) -> Result<Resolved, ConfigError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        epsilon: cli.epsilon,
        cells: cli.cells,
        horizon: cli.horizon,
        samples: cli.samples,
        out: cli.out,
        jobs: cli.jobs,
    };
    let env_out = std::env::var_os("CROSSDIFF_OUT").filter(|v| !v.is_empty()).map(PathBuf::from);
    Resolved::resolve(cli.experiment, file, flags, env_out)
}

fn execute(cfg: &Resolved) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    let mut out = OutputDir::create(&cfg.out.join(cfg.experiment.name()))?;
    let records = pool.install(|| experiments::run(cfg, &mut out))?;
    let files = out.files();
    out.manifest(&Manifest {
        tool: "crossdiff",
        version: env!("CARGO_PKG_VERSION"),
        core_version: crossdiff_core::VERSION,
        config: cfg,
        runs: &records,
        files,
    })?;
    eprintln!("wrote {}", out.root().display());
    Ok(records)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg) {
        Ok(records) => {
            let failed: Vec<&RunRecord> = records.iter().filter(|r| !r.ok).collect();
            for r in &failed {
                eprintln!("run {} failed: {}", r.label, r.failure.as_deref().unwrap_or("unknown"));
            }
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
