use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use optbench::{load_config, run_experiment, ExperimentKind};

/// Desk-scale optimizer benchmarks.
#[derive(Parser, Debug)]
#[command(name = "optbench", version)]
struct Cli {
    /// train, compare, regret, ablation or checkgrad
    experiment: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; OPTBENCH_JOBS takes precedence. Defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

const CONFIG_ERROR: u8 = 1;
const RUN_FAILURE: u8 = 2;

fn jobs(flag: Option<usize>) -> Result<usize, String> {
    if let Ok(v) = std::env::var("OPTBENCH_JOBS") {
        return v.trim().parse().map_err(|_| format!("OPTBENCH_JOBS: not a count: {v:?}"));
    }
    Ok(flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let raw = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("optbench: {}: {e}", cli.config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let mut cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("optbench: {}: {e}", cli.config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if cfg.experiment != cli.experiment {
        eprintln!(
            "optbench: {} describes a `{}` experiment, not `{}`",
            cli.config.display(),
            cfg.experiment.name(),
            cli.experiment.name()
        );
        return ExitCode::from(CONFIG_ERROR);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let jobs = match jobs(cli.jobs) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("optbench: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    match run_experiment(&cfg, &raw, jobs) {
        Ok(report) => {
            println!("{} runs written to {}", report.runs.len().max(report.probe_errors.len()), report.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("optbench: {e}");
            ExitCode::from(RUN_FAILURE)
        }
    }
}
