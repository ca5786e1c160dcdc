use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qhbm_cli::{run, CliError, CliResult, ExperimentConfig, OutDir};
use qhbm_core::parallel::Execution;

#[derive(Parser)]
#[command(name = "qhbm", version, about = "Train quantum Hamiltonian-based models from a JSON config")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config's `outdir`.
        #[arg(long)]
        outdir: Option<PathBuf>,
        /// Number of random restarts; overrides the config.
        #[arg(long)]
        restarts: Option<usize>,
        /// Worker threads; 1 runs everything sequentially.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a config, then print the effective config.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn execution(threads: Option<usize>) -> CliResult<Execution> {
    match threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(k) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
        None => Ok(Execution::Parallel),
    }
}

fn main_inner(args: Args) -> CliResult<()> {
    match args.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}", cfg.to_json());
            println!("content_hash {}", cfg.content_hash());
        }
        Command::Run { config, outdir, restarts, threads } => {
            let mut cfg = load(&config)?;
            if let Some(r) = restarts {
                cfg.restarts = r;
            }
            if outdir.is_some() {
                cfg.outdir = outdir;
            }
            cfg.validate()?;
            let exec = execution(threads)?;
            let dir = cfg.outdir.clone().unwrap_or_else(|| PathBuf::from("out"));
            let out = OutDir::create(&dir)?;
            let summary = run(&cfg, &out, exec)?;
            eprintln!(
                "{} finished in {:.1}s; artifacts in {}",
                cfg.experiment.kind(),
                summary["wall_clock_seconds"].as_f64().unwrap_or_default(),
                out.path().display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qhbm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
