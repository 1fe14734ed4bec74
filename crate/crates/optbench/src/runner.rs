//! Single runs: one optimizer, one hyperparameter point, one seed.

use std::path::Path;
use std::sync::Arc;

use optbench_core::hyper::HyperParams;
use optbench_core::objectives::{
    check_gradient, make_dense_planted, make_logreg, make_quadratic_with_samples, make_sparse_bow,
    read_sparse_dataset, Batch, BatchSampler, Objective, SamplingPolicy,
};
use optbench_core::optim::Optimizer;
use optbench_core::regret::{
    power_of_two_checkpoints, regret_bound_at, run_online, ObjectiveSequence, OnlineOptions, RegretLedger,
};
use optbench_core::{Error, OptimizerKind, ParamVector, Result, SeededRng};

use crate::config::{DataKind, ObjectiveSpec, RegretSpec, RunConfig};
use crate::trace::{RegretColumns, RunTrace, TraceRow};

/// RNG streams forked from a run seed.
const OBJECTIVE_STREAM: u64 = 0;
const SAMPLER_STREAM: u64 = 1;
const PROBE_STREAM: u64 = 2;

/// Loss growth beyond this factor of the initial loss counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
/// Full-objective loss is recorded every this many steps up to [`EARLY_HORIZON`].
pub const EARLY_INTERVAL: u64 = 10;
pub const EARLY_HORIZON: u64 = 100;

pub fn build_objective(spec: &ObjectiveSpec, seed: u64, base_dir: &Path) -> Result<Arc<dyn Objective>> {
    match spec {
        ObjectiveSpec::Quadratic { dim, condition_number, noise_std, samples, seed: own } => {
            let mut rng = SeededRng::new(own.unwrap_or(seed)).fork(OBJECTIVE_STREAM);
            Ok(Arc::new(make_quadratic_with_samples(*dim, *condition_number, *noise_std, *samples, &mut rng)?))
        }
        ObjectiveSpec::Logreg { data, n, features, classes, density, path, l2, seed: own } => {
            let mut rng = SeededRng::new(own.unwrap_or(seed)).fork(OBJECTIVE_STREAM);
            let dataset = match data {
                DataKind::SparseBow => make_sparse_bow(*n, *features, *classes, *density, &mut rng)?,
                DataKind::DensePlanted => make_dense_planted(*n, *features, *classes, &mut rng)?,
                DataKind::File => {
                    let path = path.as_ref().ok_or(Error::EmptyDataset)?;
                    read_sparse_dataset(base_dir.join(path))?
                }
            };
            Ok(Arc::new(make_logreg(dataset, *l2)?))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainPlan {
    pub steps: u64,
    pub batch_size: usize,
    pub policy: SamplingPolicy,
    pub dropout: f64,
}

impl TrainPlan {
    /// `steps` if configured, otherwise `epochs` full passes of `ceil(n / batch_size)` steps.
    pub fn from_config(cfg: &RunConfig, n: usize) -> Self {
        let per_epoch = n.div_ceil(cfg.batch_size) as u64;
        let steps = cfg.steps.unwrap_or_else(|| cfg.epochs.unwrap_or(1) * per_epoch);
        Self { steps, batch_size: cfg.batch_size, policy: cfg.sampling.into(), dropout: cfg.dropout }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub diverged: bool,
    pub theta: ParamVector,
}

impl RunOutcome {
    /// Last recorded full-objective loss, `+inf` for a diverged run.
    pub fn final_loss(&self) -> f64 {
        summarize(&self.trace).final_loss
    }
}

/// Summary statistics recomputed from a trace alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSummary {
    pub final_loss: f64,
    pub best_loss: f64,
    pub diverged: bool,
    pub steps: u64,
}

pub fn is_divergent(loss: f64, initial: f64) -> bool {
    !loss.is_finite() || (initial > 0.0 && loss > DIVERGENCE_FACTOR * initial)
}

pub fn summarize(trace: &RunTrace) -> TraceSummary {
    let initial = trace.rows.first().map_or(f64::NAN, |r| r.train_loss);
    let last = trace.rows.last().map_or(f64::NAN, |r| r.train_loss);
    let diverged = trace.rows.iter().any(|r| is_divergent(r.train_loss, initial));
    let best = trace.rows.iter().map(|r| r.train_loss).filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    TraceSummary {
        final_loss: if diverged { f64::INFINITY } else { last },
        best_loss: best,
        diverged,
        steps: trace.rows.last().map_or(0, |r| r.t),
    }
}

fn next_batch(sampler: &mut BatchSampler, obj: &dyn Objective) -> Result<Batch> {
    match obj.dataset() {
        Some(data) if sampler.dropout_p() > 0.0 => sampler.sample_batch(data),
        _ => Ok(Batch::new(sampler.next_indices(obj.num_examples())?)),
    }
}

/// Trains from the zero vector. Row `t = 0` holds the initial full loss with the full gradient
/// norm; later rows are written every [`EARLY_INTERVAL`] steps up to [`EARLY_HORIZON`], at
/// every epoch boundary and at the last step. A run stops at the first recorded loss that is
/// non-finite or exceeds [`DIVERGENCE_FACTOR`] times the initial loss.
pub fn train_run(
    obj: &dyn Objective,
    kind: OptimizerKind,
    h: &HyperParams<f64>,
    rho: f64,
    plan: &TrainPlan,
    seed: u64,
) -> Result<RunOutcome> {
    let h = h.validate(false)?;
    let n = obj.num_examples();
    let mut sampler = BatchSampler::new(SeededRng::new(seed).fork(SAMPLER_STREAM), plan.batch_size, plan.policy, plan.dropout)?;
    let mut optimizer = Optimizer::new(kind, obj.dim(), rho);
    let mut theta = ParamVector::zeros(obj.dim());
    let initial = obj.full_eval(&theta);
    let mut rows = vec![TraceRow {
        t: 0,
        epoch: 0.0,
        train_loss: initial,
        minibatch_loss: initial,
        step_norm: 0.0,
        max_abs_step: 0.0,
        grad_norm: obj.full_grad(&theta)?.norm2(),
        regret: None,
    }];
    let mut diverged = is_divergent(initial, initial);
    let mut epochs_done = 0u64;
    let mut t = 0;
    while t < plan.steps && !diverged {
        t += 1;
        let batch = next_batch(&mut sampler, obj)?;
        let minibatch_loss = obj.eval(&theta, &batch)?;
        let g = obj.grad(&theta, &batch)?;
        let epoch = sampler.epochs_elapsed(n);
        let crossed = epoch.floor() as u64 > epochs_done;
        epochs_done = epoch.floor() as u64;
        let record = (t <= EARLY_HORIZON && t % EARLY_INTERVAL == 0) || crossed || t == plan.steps;
        let mut row = TraceRow {
            t,
            epoch,
            train_loss: f64::NAN,
            minibatch_loss,
            step_norm: f64::NAN,
            max_abs_step: f64::NAN,
            grad_norm: g.norm2(),
            regret: None,
        };
        match optimizer.step(&theta, &g, &h) {
            Ok(report) => {
                row.step_norm = report.delta.norm2();
                row.max_abs_step = report.delta.norm_inf();
                theta = report.theta_next;
            }
            Err(Error::NonFinite { .. } | Error::NonFiniteGradient { .. }) => {
                row.train_loss = f64::INFINITY;
                rows.push(row);
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        if record {
            row.train_loss = obj.full_eval(&theta);
            diverged = is_divergent(row.train_loss, initial);
            rows.push(row);
        }
    }
    Ok(RunOutcome { trace: RunTrace { rows }, diverged, theta })
}

#[derive(Clone, Debug)]
pub struct RegretOutcome {
    pub trace: RunTrace,
    pub ledger: RegretLedger,
}

/// Online run over `2^max_log2` minibatch costs drawn from `obj`, reporting at powers of two.
pub fn regret_run(
    obj: Arc<dyn Objective>,
    kind: OptimizerKind,
    h: &HyperParams<f64>,
    spec: &RegretSpec,
    batch_size: usize,
    seed: u64,
) -> Result<RegretOutcome> {
    let horizon = 1usize << spec.max_log2;
    let n = obj.num_examples();
    let rng = SeededRng::new(seed);
    let mut sampler = BatchSampler::new(rng.fork(SAMPLER_STREAM), batch_size, SamplingPolicy::ShuffleEachEpoch, 0.0)?;
    let batches = (0..horizon).map(|_| sampler.next_indices(n).map(Batch::new)).collect::<Result<Vec<_>>>()?;
    let seq = ObjectiveSequence::new(obj.clone(), batches)?;
    let options = OnlineOptions {
        checkpoints: power_of_two_checkpoints(spec.min_log2, spec.max_log2),
        keep_gradients: false,
        convexity_probes: spec.convexity_probes,
        seed: rng.fork(PROBE_STREAM).next_u64(),
    };
    let mut optimizer = Optimizer::new(kind, obj.dim(), 0.0);
    let ledger = run_online(&seq, &mut optimizer, &ParamVector::zeros(obj.dim()), h, &options)?;
    let mut rows = Vec::new();
    for cp in &ledger.checkpoints {
        let i = cp.horizon - 1;
        let bound = regret_bound_at(cp, h)?;
        rows.push(TraceRow {
            t: cp.horizon as u64,
            epoch: (cp.horizon * batch_size) as f64 / n as f64,
            train_loss: obj.full_eval(&cp.theta),
            minibatch_loss: ledger.losses[i],
            step_norm: ledger.step_norms[i],
            max_abs_step: ledger.max_abs_steps[i],
            grad_norm: ledger.grad_norms[i],
            regret: Some(RegretColumns {
                regret: cp.regret,
                avg_regret: cp.average_regret(),
                bound_term1: bound.term1,
                bound_term2: bound.term2,
                bound_term3: bound.term3,
            }),
        });
    }
    Ok(RegretOutcome { trace: RunTrace { rows }, ledger })
}

/// Worst gradient-check discrepancy of each probe: a random parameter vector of unit normal
/// coordinates with a random minibatch.
pub fn gradient_probes(obj: &dyn Objective, probes: usize, batch_size: usize, h_fd: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = SeededRng::new(seed).fork(PROBE_STREAM);
    let n = obj.num_examples();
    let size = batch_size.min(n);
    (0..probes)
        .map(|_| {
            let theta = ParamVector::new((0..obj.dim()).map(|_| rng.normal()).collect());
            let batch = Batch::new((0..size).map(|_| rng.below(n)).collect());
            check_gradient(obj, &theta, &batch, h_fd, &mut rng)
        })
        .collect()
}
