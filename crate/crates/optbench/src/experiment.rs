//! Experiment orchestration: expands a config into runs, executes them on a worker pool and
//! writes the manifest, per-run traces and the summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use optbench_core::hyper::HyperParams;
use optbench_core::objectives::Objective;
use optbench_core::regret::ledger_regret_decay;
use optbench_core::{AlphaSchedule, Beta1Schedule, OptimizerKind};
use rayon::prelude::*;

use crate::config::{Emit, ExperimentKind, RunConfig};
use crate::runner::{build_objective, gradient_probes, regret_run, summarize, train_run, TrainPlan};
use crate::trace::{emit_csv, emit_dat, RunTrace};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILED_FILE: &str = "FAILED";
pub const CHECKGRAD_FILE: &str = "checkgrad.csv";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Setup(String),
    #[error("{failed} of {total} runs failed; see {marker}")]
    Runs { failed: usize, total: usize, marker: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One planned run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    /// File stem of the run's trace.
    pub name: String,
    pub optimizer: OptimizerKind,
    pub h: HyperParams<f64>,
    pub rho: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretResult {
    pub final_regret: f64,
    pub final_bound: f64,
    /// `R(T) <= bound` at every checkpoint.
    pub bound_holds: bool,
    pub decay_slope: Option<f64>,
    pub nonconvex_warnings: usize,
    pub comparators_converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub spec: RunSpec,
    pub trace: RunTrace,
    pub final_loss: f64,
    pub best_loss: f64,
    pub diverged: bool,
    pub regret: Option<RegretResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub runs: Vec<RunResult>,
    /// Worst error per probe, checkgrad only.
    pub probe_errors: Vec<f64>,
}

impl ExperimentReport {
    pub fn run(&self, name: &str) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.spec.name == name)
    }
}

fn fmt_param(x: f64) -> String {
    format!("{x}")
}

fn run_name(kind: OptimizerKind, h: &HyperParams<f64>, seed: u64) -> String {
    let mut name = format!("{}_a{}_b1{}_b2{}", kind.name(), fmt_param(h.alpha), fmt_param(h.beta1), fmt_param(h.beta2));
    if h.alpha_schedule == AlphaSchedule::InvSqrtT {
        name.push_str("_sqrtdecay");
    }
    if h.beta1_schedule == Beta1Schedule::ExponentialDecay {
        name.push_str("_b1decay");
    }
    format!("{name}_s{seed}")
}

/// Every run the config describes, in a fixed order.
pub fn plan_runs(cfg: &RunConfig) -> Vec<RunSpec> {
    let mut out = Vec::new();
    if cfg.experiment == ExperimentKind::Checkgrad {
        return out;
    }
    if cfg.experiment == ExperimentKind::Ablation {
        let base_spec = cfg.optimizers().remove(0);
        let base = base_spec.expand(false)[0];
        let a = cfg.ablation_spec();
        for &beta1 in &a.beta1 {
            for &beta2 in &a.beta2 {
                for &log_alpha in &a.log10_alpha {
                    let alpha = 10f64.powf(log_alpha);
                    let alpha = format!("{alpha:.11e}").parse().unwrap_or(alpha);
                    for kind in [OptimizerKind::Adam, OptimizerKind::AdamUncorrected] {
                        for seed in cfg.seeds() {
                            let h = HyperParams { alpha, beta1, beta2, ..base };
                            out.push(RunSpec { name: run_name(kind, &h, seed), optimizer: kind, h, rho: 0.0, seed });
                        }
                    }
                }
            }
        }
        return out;
    }
    for spec in cfg.optimizers() {
        for h in spec.expand(cfg.regret_mode()) {
            for seed in cfg.seeds() {
                out.push(RunSpec { name: run_name(spec.name, &h, seed), optimizer: spec.name, h, rho: spec.rho(), seed });
            }
        }
    }
    out
}

fn execute(cfg: &RunConfig, obj: &Arc<dyn Objective>, spec: &RunSpec) -> optbench_core::Result<RunResult> {
    if cfg.experiment == ExperimentKind::Regret {
        let out = regret_run(obj.clone(), spec.optimizer, &spec.h, &cfg.regret_spec(), cfg.batch_size, spec.seed)?;
        let last = out.trace.rows.last().and_then(|r| r.regret).expect("regret rows");
        let regret = RegretResult {
            final_regret: last.regret,
            final_bound: last.bound_term1 + last.bound_term2 + last.bound_term3,
            bound_holds: out.trace.rows.iter().filter_map(|r| r.regret).all(|g| {
                g.regret <= g.bound_term1 + g.bound_term2 + g.bound_term3
            }),
            decay_slope: ledger_regret_decay(&out.ledger).ok().map(|f| f.slope),
            nonconvex_warnings: out.ledger.nonconvex_warnings,
            comparators_converged: out.ledger.checkpoints.iter().all(|c| c.comparator.converged),
        };
        let s = summarize(&out.trace);
        return Ok(RunResult {
            spec: spec.clone(),
            trace: out.trace,
            final_loss: s.final_loss,
            best_loss: s.best_loss,
            diverged: s.diverged,
            regret: Some(regret),
        });
    }
    let plan = TrainPlan::from_config(cfg, obj.num_examples());
    let out = train_run(obj.as_ref(), spec.optimizer, &spec.h, spec.rho, &plan, spec.seed)?;
    let s = summarize(&out.trace);
    Ok(RunResult {
        spec: spec.clone(),
        trace: out.trace,
        final_loss: s.final_loss,
        best_loss: s.best_loss,
        diverged: s.diverged,
        regret: None,
    })
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn manifest(cfg: &RunConfig, raw_config: &str, runs: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "artifact = optbench {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "experiment = {}", cfg.experiment.name());
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out, "replicates = {}", cfg.replicates);
    let _ = writeln!(out, "runs = {runs}");
    out.push_str("--- config ---\n");
    out.push_str(raw_config);
    if !raw_config.ends_with('\n') {
        out.push('\n');
    }
    out
}

/// Summary rows ranked by final loss, ties kept in plan order.
fn ranked(runs: &[RunResult]) -> Vec<&RunResult> {
    let mut order: Vec<&RunResult> = runs.iter().collect();
    order.sort_by(|a, b| a.final_loss.total_cmp(&b.final_loss));
    order
}

pub fn summary_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("rank,run,optimizer,alpha,beta1,beta2,epsilon,seed,final_train_loss,best_train_loss,diverged,steps\n");
    for (rank, r) in ranked(runs).into_iter().enumerate() {
        let h = &r.spec.h;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            rank + 1,
            r.spec.name,
            r.spec.optimizer,
            fmt_param(h.alpha),
            fmt_param(h.beta1),
            fmt_param(h.beta2),
            fmt_param(h.epsilon),
            r.spec.seed,
            real(r.final_loss),
            real(r.best_loss),
            r.diverged,
            r.trace.rows.last().map_or(0, |row| row.t),
        );
    }
    out
}

/// One row per (beta1, beta2, alpha, bias correction) cell, averaging over seeds.
pub fn ablation_summary_csv(runs: &[RunResult]) -> String {
    struct Cell<'a> {
        beta1: f64,
        beta2: f64,
        alpha: f64,
        corrected: bool,
        runs: Vec<&'a RunResult>,
    }
    let mut cells: Vec<Cell> = Vec::new();
    for r in runs {
        let (h, corrected) = (&r.spec.h, r.spec.optimizer == OptimizerKind::Adam);
        match cells.iter_mut().find(|c| c.beta1 == h.beta1 && c.beta2 == h.beta2 && c.alpha == h.alpha && c.corrected == corrected) {
            Some(c) => c.runs.push(r),
            None => cells.push(Cell { beta1: h.beta1, beta2: h.beta2, alpha: h.alpha, corrected, runs: vec![r] }),
        }
    }
    let mean = |c: &Cell| c.runs.iter().map(|r| r.final_loss).sum::<f64>() / c.runs.len() as f64;
    let mut order: Vec<(f64, &Cell)> = cells.iter().map(|c| (mean(c), c)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = String::from("rank,beta1,beta2,alpha,bias_correction,mean_final_train_loss,best_final_train_loss,diverged_runs,runs\n");
    for (rank, (m, c)) in order.into_iter().enumerate() {
        let best = c.runs.iter().map(|r| r.final_loss).fold(f64::INFINITY, f64::min);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            rank + 1,
            fmt_param(c.beta1),
            fmt_param(c.beta2),
            fmt_param(c.alpha),
            if c.corrected { "on" } else { "off" },
            real(m),
            real(best),
            c.runs.iter().filter(|r| r.diverged).count(),
            c.runs.len(),
        );
    }
    out
}

pub fn regret_summary_csv(runs: &[RunResult]) -> String {
    let mut out = String::from(
        "run,optimizer,alpha,seed,horizon,final_regret,final_bound,bound_holds,decay_slope,nonconvex_warnings,comparators_converged\n",
    );
    for r in runs {
        let g = r.regret.as_ref().expect("regret run");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.spec.name,
            r.spec.optimizer,
            fmt_param(r.spec.h.alpha),
            r.spec.seed,
            r.trace.rows.last().map_or(0, |row| row.t),
            real(g.final_regret),
            real(g.final_bound),
            g.bound_holds,
            g.decay_slope.map_or_else(|| "nan".to_string(), real),
            g.nonconvex_warnings,
            g.comparators_converged,
        );
    }
    out
}

fn write_failed(dir: &Path, lines: &[String]) -> Result<String, ExperimentError> {
    let marker = dir.join(FAILED_FILE);
    fs::write(&marker, lines.join("\n") + "\n")?;
    Ok(marker.display().to_string())
}

/// Runs the experiment with `jobs` workers. `raw_config` is echoed into the manifest.
pub fn run_experiment(cfg: &RunConfig, raw_config: &str, jobs: usize) -> Result<ExperimentReport, ExperimentError> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let marker = dir.join(FAILED_FILE);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let plan = plan_runs(cfg);
    let mut names: Vec<&str> = plan.iter().map(|r| r.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(ExperimentError::Setup(format!("two runs share the name {}", w[0])));
    }
    fs::write(dir.join(MANIFEST_FILE), manifest(cfg, raw_config, plan.len()))?;

    let obj = match build_objective(&cfg.objective, cfg.seed, &cfg.base_dir) {
        Ok(o) => o,
        Err(e) => {
            let m = write_failed(&dir, &[format!("objective: {e}")])?;
            return Err(ExperimentError::Runs { failed: 1, total: 1, marker: m });
        }
    };

    if cfg.experiment == ExperimentKind::Checkgrad {
        let spec = cfg.checkgrad_spec();
        let errors = match gradient_probes(obj.as_ref(), spec.probes, cfg.batch_size.max(8), spec.h, cfg.seed) {
            Ok(e) => e,
            Err(e) => {
                let m = write_failed(&dir, &[format!("checkgrad: {e}")])?;
                return Err(ExperimentError::Runs { failed: 1, total: 1, marker: m });
            }
        };
        let mut csv = String::from("probe,max_rel_error\n");
        for (i, e) in errors.iter().enumerate() {
            let _ = writeln!(csv, "{i},{}", real(*e));
        }
        fs::write(dir.join(CHECKGRAD_FILE), csv)?;
        let bad: Vec<String> = errors
            .iter()
            .enumerate()
            .filter(|(_, &e)| !(e <= spec.tolerance))
            .map(|(i, e)| format!("probe {i}: error {e:e} exceeds {:e}", spec.tolerance))
            .collect();
        if !bad.is_empty() {
            let m = write_failed(&dir, &bad)?;
            return Err(ExperimentError::Runs { failed: bad.len(), total: errors.len(), marker: m });
        }
        return Ok(ExperimentReport { output_dir: dir, runs: Vec::new(), probe_errors: errors });
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Setup(e.to_string()))?;
    let emit = cfg.emit;
    let outcomes: Vec<Result<RunResult, String>> = pool.install(|| {
        plan.par_iter()
            .map(|spec| {
                let result = execute(cfg, &obj, spec).map_err(|e| format!("{}: {e}", spec.name))?;
                let write = |ext: &str| dir.join(format!("{}.{ext}", spec.name));
                emit_csv(&result.trace, write("csv")).map_err(|e| format!("{}: {e}", spec.name))?;
                if emit == Emit::CsvAndDat {
                    emit_dat(&result.trace, write("dat")).map_err(|e| format!("{}: {e}", spec.name))?;
                }
                Ok(result)
            })
            .collect()
    });

    let total = outcomes.len();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(e) => failures.push(e),
        }
    }
    let summary = match cfg.experiment {
        ExperimentKind::Ablation => ablation_summary_csv(&runs),
        ExperimentKind::Regret => regret_summary_csv(&runs),
        _ => summary_csv(&runs),
    };
    fs::write(dir.join(SUMMARY_FILE), summary)?;
    if !failures.is_empty() {
        let m = write_failed(&dir, &failures)?;
        return Err(ExperimentError::Runs { failed: failures.len(), total, marker: m });
    }
    Ok(ExperimentReport { output_dir: dir, runs, probe_errors: Vec::new() })
}
