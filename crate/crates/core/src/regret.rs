//! Online convex optimization harness.
//!
//! A learner predicts `theta_t`, the cost `f_t` is revealed and charged at `theta_t`, and the
//! learner steps on `grad f_t(theta_t)`. Regret at horizon `T` is measured against the fixed
//! point minimizing `sum_{t<=T} f_t`, solved separately for every reporting horizon.

use std::sync::Arc;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;

use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::objectives::{Batch, Objective};
use crate::optim::Optimizer;
use crate::rng::SeededRng;
use crate::ParamVector;

/// Mean of the first `horizon` costs, as one differentiable function.
pub trait PrefixCost {
    fn cost(&self, theta: &ParamVector) -> Result<f64>;
    fn grad(&self, theta: &ParamVector) -> Result<ParamVector>;
}

/// Sequence of convex costs `f_1, ..., f_T` with 1-based step index.
pub trait OnlineSequence: Send + Sync {
    fn horizon(&self) -> usize;
    fn dim(&self) -> usize;
    fn cost(&self, t: usize, theta: &ParamVector) -> Result<f64>;
    fn cost_grad(&self, t: usize, theta: &ParamVector) -> Result<ParamVector>;
    /// `(1 / horizon) sum_{t <= horizon} f_t`. [`LoopPrefix`] is a generic implementation.
    fn prefix_mean(&self, horizon: usize) -> Box<dyn PrefixCost + '_>;
}

/// Prefix mean evaluated by looping over the individual costs.
pub struct LoopPrefix<'a, Q: ?Sized> {
    pub seq: &'a Q,
    pub horizon: usize,
}

impl<Q: OnlineSequence + ?Sized> PrefixCost for LoopPrefix<'_, Q> {
    fn cost(&self, theta: &ParamVector) -> Result<f64> {
        let mut acc = 0.0;
        for t in 1..=self.horizon {
            acc += self.seq.cost(t, theta)?;
        }
        Ok(acc / self.horizon as f64)
    }

    fn grad(&self, theta: &ParamVector) -> Result<ParamVector> {
        let mut acc = ParamVector::zeros(self.seq.dim());
        for t in 1..=self.horizon {
            acc.axpy(1.0, &self.seq.cost_grad(t, theta)?)?;
        }
        Ok(acc.scale(1.0 / self.horizon as f64))
    }
}

/// `f_t(theta) = objective.eval(theta, batches[t - 1])`.
pub struct ObjectiveSequence {
    objective: Arc<dyn Objective>,
    batches: Vec<Batch>,
}

impl ObjectiveSequence {
    pub fn new(objective: Arc<dyn Objective>, batches: Vec<Batch>) -> Result<Self> {
        if batches.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(Self { objective, batches })
    }

    /// One example per step, cycling through the examples in order.
    pub fn cycling(objective: Arc<dyn Objective>, horizon: usize) -> Result<Self> {
        let n = objective.num_examples();
        Self::new(objective, (0..horizon).map(|t| Batch::single(t % n)).collect())
    }

    /// One uniformly drawn example per step.
    pub fn sampled(objective: Arc<dyn Objective>, horizon: usize, rng: &mut SeededRng) -> Result<Self> {
        let n = objective.num_examples();
        Self::new(objective, (0..horizon).map(|_| Batch::single(rng.below(n))).collect())
    }

    pub fn objective(&self) -> &dyn Objective {
        self.objective.as_ref()
    }

    fn batch(&self, t: usize) -> Result<&Batch> {
        if t == 0 || t > self.batches.len() {
            return Err(Error::Index { index: t, dim: self.batches.len() });
        }
        Ok(&self.batches[t - 1])
    }

    /// All examples of the first `horizon` batches folded into one weighted batch whose
    /// weighted mean equals the mean of the per-step costs.
    fn merged(&self, horizon: usize) -> Batch {
        let batches = &self.batches[..horizon];
        if batches.iter().any(|b| b.features.is_some()) {
            let mut merged = Batch { indices: Vec::new(), features: Some(Vec::new()), weights: Some(Vec::new()) };
            for b in batches {
                let total = b.total_weight();
                for (j, &i) in b.indices.iter().enumerate() {
                    merged.indices.push(i);
                    merged.weights.as_mut().unwrap().push(b.weight(j) / total);
                    let row = match &b.features {
                        Some(rows) => rows[j].clone(),
                        None => match self.objective.dataset() {
                            Some(d) => d.row(i).clone(),
                            None => unreachable!("feature rows without a dataset"),
                        },
                    };
                    merged.features.as_mut().unwrap().push(row);
                }
            }
            return merged;
        }
        let mut weight = vec![0.0; self.objective.num_examples()];
        for b in batches {
            let total = b.total_weight();
            for (j, &i) in b.indices.iter().enumerate() {
                weight[i] += b.weight(j) / total;
            }
        }
        let (indices, weights) = weight.into_iter().enumerate().filter(|(_, w)| *w > 0.0).unzip();
        Batch { indices, features: None, weights: Some(weights) }
    }
}

struct MergedPrefix<'a> {
    objective: &'a dyn Objective,
    batch: Batch,
}

impl PrefixCost for MergedPrefix<'_> {
    fn cost(&self, theta: &ParamVector) -> Result<f64> {
        self.objective.eval(theta, &self.batch)
    }

    fn grad(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.objective.grad(theta, &self.batch)
    }
}

impl OnlineSequence for ObjectiveSequence {
    fn horizon(&self) -> usize {
        self.batches.len()
    }

    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn cost(&self, t: usize, theta: &ParamVector) -> Result<f64> {
        self.objective.eval(theta, self.batch(t)?)
    }

    fn cost_grad(&self, t: usize, theta: &ParamVector) -> Result<ParamVector> {
        self.objective.grad(theta, self.batch(t)?)
    }

    fn prefix_mean(&self, horizon: usize) -> Box<dyn PrefixCost + '_> {
        let horizon = horizon.min(self.batches.len());
        Box::new(MergedPrefix { objective: self.objective.as_ref(), batch: self.merged(horizon) })
    }
}

/// Gradient norm at which the solver stops.
pub const COMPARATOR_TOLERANCE: f64 = 1e-10;
/// A solution certifies optimality when its gradient norm is at most this times `1 + ||theta||`.
pub const COMPARATOR_CERTIFICATE: f64 = 1e-8;
/// The descent phase gives up after this many iterations without a new best gradient norm.
const DESCENT_PATIENCE: usize = 1_000;
/// Budget of cost-and-gradient iterations across all solver phases.
pub const COMPARATOR_MAX_ITERATIONS: usize = 1_000_000;
const LBFGS_MEMORY: usize = 10;
const LBFGS_ROUND_ITERATIONS: u64 = 2_000;
const LBFGS_ROUNDS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Comparator {
    pub theta: ParamVector,
    /// Gradient norm of the prefix mean at `theta`.
    pub grad_norm: f64,
    pub iterations: usize,
    /// `grad_norm <= COMPARATOR_CERTIFICATE * (1 + ||theta||)`.
    pub converged: bool,
}

fn certified(theta: &ParamVector, grad_norm: f64) -> bool {
    grad_norm <= COMPARATOR_TOLERANCE || grad_norm <= COMPARATOR_CERTIFICATE * (1.0 + theta.norm2())
}

struct PrefixProblem<'a>(&'a dyn PrefixCost);

/// Rejects non-finite trial points and values so a diverging line search fails instead of looping.
fn finite_point(p: &[f64]) -> std::result::Result<ParamVector, argmin::core::Error> {
    let x = ParamVector::new(p.to_vec());
    match x.first_non_finite() {
        Some(index) => Err(Error::NonFinite { index }.into()),
        None => Ok(x),
    }
}

impl CostFunction for PrefixProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let c = self.0.cost(&finite_point(p)?)?;
        if c.is_finite() {
            Ok(c)
        } else {
            Err(Error::NonFinite { index: 0 }.into())
        }
    }
}

impl Gradient for PrefixProblem<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, p: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let g = self.0.grad(&finite_point(p)?)?;
        match g.first_non_finite() {
            Some(index) => Err(Error::NonFinite { index }.into()),
            None => Ok(g.into_vec()),
        }
    }
}

/// Minimizes the mean of the first `horizon` costs, stopping once the gradient norm is at most
/// [`COMPARATOR_TOLERANCE`]. L-BFGS runs in rounds restarted from the best point so far; a
/// backtracking gradient descent finishes what the line search cannot resolve near the
/// optimum. A run that exhausts the budget or stalls returns its best iterate, certified or not.
pub fn solve_comparator(seq: &dyn OnlineSequence, horizon: usize, init: &ParamVector) -> Result<Comparator> {
    if horizon == 0 || horizon > seq.horizon() {
        return Err(Error::Index { index: horizon, dim: seq.horizon() });
    }
    let f = seq.prefix_mean(horizon);
    let mut x = init.clone();
    let mut gn = f.grad(&x)?.norm2();
    let mut iterations = 0usize;
    for _ in 0..LBFGS_ROUNDS {
        if gn <= COMPARATOR_TOLERANCE {
            return Ok(Comparator { converged: certified(&x, gn), theta: x, grad_norm: gn, iterations });
        }
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), LBFGS_MEMORY)
            .with_tolerance_grad(COMPARATOR_TOLERANCE)
            .and_then(|s| s.with_tolerance_cost(0.0))
            .expect("non-negative tolerances");
        let run = Executor::new(PrefixProblem(f.as_ref()), solver)
            .configure(|s| s.param(x.as_slice().to_vec()).max_iters(LBFGS_ROUND_ITERATIONS))
            .run();
        // a failed line search ends the quasi-Newton phase
        let Ok(res) = run else { break };
        iterations += res.state().get_iter() as usize;
        let Some(p) = res.state().get_best_param() else { break };
        let candidate = ParamVector::new(p.clone());
        let cn = f.grad(&candidate)?.norm2();
        if !(cn < gn) {
            break;
        }
        x = candidate;
        gn = cn;
    }
    let budget = COMPARATOR_MAX_ITERATIONS.saturating_sub(iterations);
    let mut out = descend(f.as_ref(), x, budget)?;
    out.iterations += iterations;
    Ok(out)
}

/// Gradient descent with Armijo backtracking and a rounding-aware acceptance rule.
fn descend(f: &dyn PrefixCost, init: ParamVector, budget: usize) -> Result<Comparator> {
    let mut x = init;
    let mut fx = f.cost(&x)?;
    let mut g = f.grad(&x)?;
    let mut gn = g.norm2();
    let mut best = (x.clone(), gn);
    let mut step = 1.0;
    let armijo = 1e-4;
    let mut it = 0;
    let mut since_best = 0;
    while it < budget && since_best < DESCENT_PATIENCE {
        if gn <= COMPARATOR_TOLERANCE {
            return Ok(Comparator { converged: certified(&x, gn), theta: x, grad_norm: gn, iterations: it });
        }
        let mut accepted = None;
        while step > 1e-30 {
            let mut trial = x.clone();
            trial.axpy(-step, &g)?;
            let ft = f.cost(&trial)?;
            if ft <= fx - armijo * step * gn * gn {
                accepted = Some((trial, ft, None));
                break;
            }
            // near the optimum the decrease drowns in rounding; fall back on the gradient norm
            if (fx - ft).abs() <= 1e-13 * fx.abs().max(1.0) {
                let gt = f.grad(&trial)?;
                if gt.norm2() < gn {
                    accepted = Some((trial, ft, Some(gt)));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            break;
        };
        x = trial;
        fx = ft;
        g = match gt {
            Some(gt) => gt,
            None => f.grad(&x)?,
        };
        gn = g.norm2();
        if gn < best.1 {
            best = (x.clone(), gn);
            since_best = 0;
        } else {
            since_best += 1;
        }
        step *= 2.0;
        it += 1;
    }
    Ok(Comparator { converged: certified(&best.0, best.1), theta: best.0, grad_norm: best.1, iterations: it })
}

/// Bounds on gradients and iterate spread observed along a trajectory.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ObservedConstants {
    /// max_t ||g_t||_2
    pub g: f64,
    /// max_t ||g_t||_inf
    pub g_inf: f64,
    /// Diagonal of the bounding box of the iterates (and comparator); an upper bound on the
    /// largest pairwise distance.
    pub d: f64,
    /// Largest coordinate range of the box, exactly the largest pairwise inf-distance.
    pub d_inf: f64,
}

#[derive(Clone, Debug)]
struct IterateBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IterateBox {
    fn new(dim: usize) -> Self {
        Self { lo: vec![f64::INFINITY; dim], hi: vec![f64::NEG_INFINITY; dim] }
    }

    fn include(&mut self, theta: &ParamVector) {
        for (k, &x) in theta.iter().enumerate() {
            self.lo[k] = self.lo[k].min(x);
            self.hi[k] = self.hi[k].max(x);
        }
    }

    fn spans(&self) -> (f64, f64) {
        let widths = self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).max(0.0));
        widths.fold((0.0, 0.0), |(sq, mx), w| (sq + w * w, f64::max(mx, w)))
    }
}

/// Regret bookkeeping at one reporting horizon.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub horizon: usize,
    /// Iterate played at step `T`.
    pub theta: ParamVector,
    /// `sum_{t <= T} f_t(theta_t)`
    pub cumulative_loss: f64,
    /// `sum_{t <= T} f_t(theta*)`
    pub comparator_value: f64,
    pub regret: f64,
    pub comparator: Comparator,
    pub constants: ObservedConstants,
    /// Bias-corrected second moment reported by the learner at step `T`.
    pub v_hat: ParamVector,
    /// `||g_{1:T,i}||_2` per coordinate.
    pub grad_history_norms: Vec<f64>,
}

impl Checkpoint {
    pub fn average_regret(&self) -> f64 {
        self.regret / self.horizon as f64
    }
}

#[derive(Clone, Debug)]
pub struct RegretLedger {
    /// `f_t(theta_t)` for every step.
    pub losses: Vec<f64>,
    pub cumulative_loss: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub max_abs_steps: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Running `sum_t g_{t,i}^2`.
    pub grad_sq_sums: Vec<f64>,
    /// Every gradient, when requested.
    pub gradients: Option<Vec<ParamVector>>,
    pub checkpoints: Vec<Checkpoint>,
    /// Failed random midpoint convexity probes.
    pub nonconvex_warnings: usize,
    /// How the first-moment bias factor was formed: `1 - prod beta1_s`.
    pub beta1_correction: &'static str,
}

impl RegretLedger {
    pub fn horizon(&self) -> usize {
        self.losses.len()
    }

    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("ledger always holds the final horizon")
    }

    pub fn checkpoint(&self, horizon: usize) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.horizon == horizon)
    }

    /// `||g_{1:T,i}||_2` from the running sums.
    pub fn grad_history_norms(&self) -> Vec<f64> {
        self.grad_sq_sums.iter().map(|s| s.sqrt()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct OnlineOptions {
    /// Reporting horizons; the final horizon is always added.
    pub checkpoints: Vec<usize>,
    pub keep_gradients: bool,
    pub convexity_probes: usize,
    pub seed: u64,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        Self { checkpoints: Vec::new(), keep_gradients: false, convexity_probes: 8, seed: 0 }
    }
}

/// Powers of two `2^lo ..= 2^hi`.
pub fn power_of_two_checkpoints(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

fn convexity_holds(seq: &dyn OnlineSequence, t: usize, a: &ParamVector, rng: &mut SeededRng) -> Result<bool> {
    let b = ParamVector::new(a.iter().map(|x| x + rng.normal()).collect());
    let mid = a.add(&b)?.scale(0.5);
    let (fa, fb, fm) = (seq.cost(t, a)?, seq.cost(t, &b)?, seq.cost(t, &mid)?);
    Ok(fm <= 0.5 * (fa + fb) + 1e-12 * (1.0 + fa.abs() + fb.abs()))
}

/// Plays `optimizer` against `seq` from `theta0`. The hyperparameters must pass regret-mode
/// validation.
pub fn run_online(
    seq: &dyn OnlineSequence,
    optimizer: &mut Optimizer<f64>,
    theta0: &ParamVector,
    h: &HyperParams<f64>,
    options: &OnlineOptions,
) -> Result<RegretLedger> {
    let h = h.validate(true)?;
    let horizon = seq.horizon();
    let dim = seq.dim();
    if theta0.len() != dim {
        return Err(Error::DimMismatch { expected: dim, found: theta0.len() });
    }
    let mut checkpoints: Vec<usize> = options.checkpoints.iter().copied().filter(|&c| c >= 1).collect();
    if let Some(&c) = checkpoints.iter().find(|&&c| c > horizon) {
        return Err(Error::Index { index: c, dim: horizon });
    }
    checkpoints.push(horizon);
    checkpoints.sort_unstable();
    checkpoints.dedup();

    let mut rng = SeededRng::new(options.seed);
    let probe_every = horizon.checked_div(options.convexity_probes).map_or(0, |k| k.max(1));

    let mut ledger = RegretLedger {
        losses: Vec::with_capacity(horizon),
        cumulative_loss: Vec::with_capacity(horizon),
        step_norms: Vec::with_capacity(horizon),
        max_abs_steps: Vec::with_capacity(horizon),
        grad_norms: Vec::with_capacity(horizon),
        grad_sq_sums: vec![0.0; dim],
        gradients: options.keep_gradients.then(Vec::new),
        checkpoints: Vec::new(),
        nonconvex_warnings: 0,
        beta1_correction: "1 - prod_s beta1_s",
    };
    let mut bounds = IterateBox::new(dim);
    let mut constants = ObservedConstants::default();
    let mut snapshots = Vec::new();
    let mut theta = theta0.clone();
    let mut cumulative = 0.0;
    let mut next_cp = 0;

    for t in 1..=horizon {
        bounds.include(&theta);
        let loss = seq.cost(t, &theta)?;
        let g = seq.cost_grad(t, &theta)?;
        if probe_every > 0 && t % probe_every == 0 && !convexity_holds(seq, t, &theta, &mut rng)? {
            ledger.nonconvex_warnings += 1;
        }
        cumulative += loss;
        ledger.losses.push(loss);
        ledger.cumulative_loss.push(cumulative);
        let gn = g.norm2();
        ledger.grad_norms.push(gn);
        constants.g = constants.g.max(gn);
        constants.g_inf = constants.g_inf.max(g.norm_inf());
        for (s, &x) in ledger.grad_sq_sums.iter_mut().zip(g.iter()) {
            *s += x * x;
        }
        let report = optimizer.step(&theta, &g, &h)?;
        ledger.step_norms.push(report.delta.norm2());
        ledger.max_abs_steps.push(report.delta.norm_inf());
        if let Some(all) = ledger.gradients.as_mut() {
            all.push(g);
        }
        if checkpoints[next_cp] == t {
            snapshots.push((t, cumulative, theta.clone(), bounds.clone(), constants.clone(), report.v_hat_or_u.clone(), ledger.grad_history_norms()));
            next_cp += 1;
        }
        theta = report.theta_next;
    }

    // each comparator warm-starts from the previous horizon's
    let mut warm: Option<ParamVector> = None;
    for (t, cumulative, theta_t, mut bounds, mut constants, v_hat, grad_history_norms) in snapshots {
        let comparator = solve_comparator(seq, t, warm.as_ref().unwrap_or(&theta_t))?;
        let comparator_value = seq.prefix_mean(t).cost(&comparator.theta)? * t as f64;
        bounds.include(&comparator.theta);
        let (sq, d_inf) = bounds.spans();
        constants.d = sq.sqrt();
        constants.d_inf = d_inf;
        warm = Some(comparator.theta.clone());
        ledger.checkpoints.push(Checkpoint {
            horizon: t,
            theta: theta_t,
            cumulative_loss: cumulative,
            comparator_value,
            regret: cumulative - comparator_value,
            comparator,
            constants,
            v_hat,
            grad_history_norms,
        });
    }
    Ok(ledger)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTerms {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub total: f64,
}

/// Evaluates the three terms of the Adam regret bound with the constants observed up to the
/// checkpoint:
///
/// * `D^2 / (2 alpha (1 - beta1)) * sum_i sqrt(T v_hat_{T,i})`
/// * `alpha (1 + beta1) G_inf / ((1 - beta1) sqrt(1 - beta2) (1 - gamma)^2) * sum_i ||g_{1:T,i}||_2`
/// * `d * D_inf^2 G_inf sqrt(1 - beta2) / (2 alpha (1 - beta1) (1 - lambda)^2)`
pub fn regret_bound_at(checkpoint: &Checkpoint, h: &HyperParams<f64>) -> Result<BoundTerms> {
    if h.lambda >= 1.0 {
        return Err(Error::LambdaOne);
    }
    let (alpha, b1, b2) = (h.alpha, h.beta1, h.beta2);
    let gamma = h.gamma();
    let c = &checkpoint.constants;
    let t = checkpoint.horizon as f64;
    let dim = checkpoint.v_hat.len() as f64;
    let root_sum: f64 = checkpoint.v_hat.iter().map(|v| (t * v).sqrt()).sum();
    let hist_sum: f64 = checkpoint.grad_history_norms.iter().sum();
    let term1 = c.d * c.d / (2.0 * alpha * (1.0 - b1)) * root_sum;
    let term2 = alpha * (1.0 + b1) * c.g_inf / ((1.0 - b1) * (1.0 - b2).sqrt() * (1.0 - gamma).powi(2)) * hist_sum;
    let term3 = dim * c.d_inf * c.d_inf * c.g_inf * (1.0 - b2).sqrt()
        / (2.0 * alpha * (1.0 - b1) * (1.0 - h.lambda).powi(2));
    Ok(BoundTerms { term1, term2, term3, total: term1 + term2 + term3 })
}

/// Bound at the ledger's final horizon.
pub fn regret_bound(ledger: &RegretLedger, h: &HyperParams<f64>) -> Result<BoundTerms> {
    regret_bound_at(ledger.final_checkpoint(), h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    /// Least-squares slope of `log(R(T) / T)` against `log T`.
    pub slope: f64,
    pub intercept: f64,
    /// Horizons left out because `R(T) <= 0`.
    pub excluded: Vec<usize>,
}

pub const MIN_DECAY_POINTS: usize = 4;

/// Fits `log(R(T)/T) = slope * log T + intercept` over `(T, R(T))` pairs.
pub fn average_regret_decay(points: &[(usize, f64)]) -> Result<DecayFit> {
    let (kept, dropped): (Vec<_>, Vec<_>) = points.iter().partition(|(_, r)| *r > 0.0);
    if kept.len() < MIN_DECAY_POINTS {
        return Err(Error::DegenerateRegret { needed: MIN_DECAY_POINTS, found: kept.len() });
    }
    let xs: Vec<f64> = kept.iter().map(|(t, _)| (*t as f64).ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|(t, r)| (r / *t as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit { slope, intercept: my - slope * mx, excluded: dropped.iter().map(|(t, _)| *t).collect() })
}

/// Decay fit over a ledger's checkpoints.
pub fn ledger_regret_decay(ledger: &RegretLedger) -> Result<DecayFit> {
    let points: Vec<(usize, f64)> = ledger.checkpoints.iter().map(|c| (c.horizon, c.regret)).collect();
    average_regret_decay(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_quadratic_with_samples, Quadratic};
    use crate::optim::OptimizerKind;

    fn adam(dim: usize) -> Optimizer<f64> {
        Optimizer::new(OptimizerKind::Adam, dim, 0.9)
    }

    fn constant_cost(center: f64, horizon: usize) -> ObjectiveSequence {
        let q = Quadratic::new(vec![1.0], ParamVector::new(vec![center]), 0.0, 1, &mut SeededRng::new(0)).unwrap();
        ObjectiveSequence::new(Arc::new(q), vec![Batch::single(0); horizon]).unwrap()
    }

    #[test]
    fn ill_conditioned_comparator_is_certified() {
        // curvatures 1e-4 and 1 with centers 3 and -2: the minimizer is the center itself
        let q = Quadratic::new(vec![1e-4, 1.0], ParamVector::new(vec![3.0, -2.0]), 0.0, 1, &mut SeededRng::new(0)).unwrap();
        let seq = ObjectiveSequence::new(Arc::new(q), vec![Batch::single(0); 4]).unwrap();
        let sol = solve_comparator(&seq, 4, &ParamVector::zeros(2)).unwrap();
        assert!(sol.converged && sol.grad_norm <= COMPARATOR_TOLERANCE, "{sol:?}");
        assert!((sol.theta[0] - 3.0).abs() < 1e-5 && (sol.theta[1] + 2.0).abs() < 1e-9, "{sol:?}");
        assert!(sol.iterations < 10_000, "{}", sol.iterations);
    }

    #[test]
    fn optimal_play_has_zero_regret() {
        let seq = constant_cost(1.0, 64);
        let h = HyperParams::regret_defaults();
        let opts = OnlineOptions { checkpoints: vec![1, 8, 32], ..Default::default() };
        let ledger = run_online(&seq, &mut adam(1), &ParamVector::new(vec![1.0]), &h, &opts).unwrap();
        for cp in &ledger.checkpoints {
            assert_eq!(cp.regret, 0.0, "T = {}", cp.horizon);
        }
        let bound = regret_bound(&ledger, &h).unwrap();
        assert_eq!(bound.total, 0.0);
    }

    #[test]
    fn regret_is_nonnegative_and_average_decays() {
        let q = make_quadratic_with_samples(1, 1.0, 0.5, 1000, &mut SeededRng::new(2)).unwrap();
        let seq = ObjectiveSequence::cycling(Arc::new(q), 1000).unwrap();
        let h = HyperParams::regret_defaults().with_alpha(0.1);
        let opts = OnlineOptions { checkpoints: vec![100, 1000], ..Default::default() };
        let ledger = run_online(&seq, &mut adam(1), &ParamVector::new(vec![2.0]), &h, &opts).unwrap();
        for cp in &ledger.checkpoints {
            assert!(cp.regret >= -1e-9);
        }
        let early = ledger.checkpoint(100).unwrap().average_regret();
        let late = ledger.checkpoint(1000).unwrap().average_regret();
        assert!(late < early, "{late} !< {early}");
    }

    #[test]
    fn comparator_matches_weighted_mean_of_centers() {
        // sum_t 1/2 d_t (theta - c_t)^2 is minimized at sum d c / sum d
        struct Quads(Vec<(f64, f64)>);
        impl OnlineSequence for Quads {
            fn horizon(&self) -> usize {
                self.0.len()
            }
            fn dim(&self) -> usize {
                1
            }
            fn cost(&self, t: usize, theta: &ParamVector) -> Result<f64> {
                let (d, c) = self.0[t - 1];
                Ok(0.5 * d * (theta[0] - c).powi(2))
            }
            fn cost_grad(&self, t: usize, theta: &ParamVector) -> Result<ParamVector> {
                let (d, c) = self.0[t - 1];
                Ok(ParamVector::new(vec![d * (theta[0] - c)]))
            }
            fn prefix_mean(&self, horizon: usize) -> Box<dyn PrefixCost + '_> {
                Box::new(LoopPrefix { seq: self, horizon })
            }
        }
        let mut rng = SeededRng::new(3);
        let terms: Vec<(f64, f64)> = (0..50).map(|_| (rng.uniform_range(0.1, 5.0), rng.normal() * 3.0)).collect();
        let closed = terms.iter().map(|(d, c)| d * c).sum::<f64>() / terms.iter().map(|(d, _)| d).sum::<f64>();
        let seq = Quads(terms);
        let sol = solve_comparator(&seq, 50, &ParamVector::new(vec![10.0])).unwrap();
        assert!(sol.converged);
        assert!((sol.theta[0] - closed).abs() < 1e-8);

        let at_min = solve_comparator(&constant_cost(0.25, 3), 1, &ParamVector::new(vec![0.25])).unwrap();
        assert_eq!(at_min.iterations, 0);
        assert_eq!(at_min.theta[0], 0.25);
        let repeated = solve_comparator(&constant_cost(-2.0, 10), 10, &ParamVector::new(vec![3.0])).unwrap();
        assert!((repeated.theta[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn lambda_one_has_no_bound() {
        let seq = constant_cost(0.0, 4);
        let h = HyperParams::regret_defaults();
        let ledger = run_online(&seq, &mut adam(1), &ParamVector::new(vec![1.0]), &h, &OnlineOptions::default()).unwrap();
        let mut h1 = h;
        h1.lambda = 1.0;
        assert_eq!(regret_bound(&ledger, &h1), Err(Error::LambdaOne));
    }

    #[test]
    fn bound_terms_scale_with_alpha() {
        let seq = constant_cost(0.0, 16);
        let h = HyperParams::regret_defaults().with_alpha(0.3);
        let ledger = run_online(&seq, &mut adam(1), &ParamVector::new(vec![1.0]), &h, &OnlineOptions::default()).unwrap();
        let a = regret_bound(&ledger, &h).unwrap();
        let b = regret_bound(&ledger, &h.with_alpha(0.6)).unwrap();
        assert!((b.term2 / a.term2 - 2.0).abs() < 1e-12);
        assert!((b.term1 / a.term1 - 0.5).abs() < 1e-12);
        assert!((b.term3 / a.term3 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn run_requires_regret_mode() {
        let seq = constant_cost(0.0, 4);
        let err = run_online(&seq, &mut adam(1), &ParamVector::zeros(1), &HyperParams::default(), &OnlineOptions::default());
        assert!(matches!(err, Err(Error::Range { .. })));
    }

    #[test]
    fn decay_fit_on_synthetic_ledgers() {
        let sqrt: Vec<(usize, f64)> = (5..=14).map(|k| (1usize << k, ((1usize << k) as f64).sqrt())).collect();
        assert!((average_regret_decay(&sqrt).unwrap().slope + 0.5).abs() < 1e-12);
        let linear: Vec<(usize, f64)> = (5..=14).map(|k| (1usize << k, (1usize << k) as f64)).collect();
        assert!(average_regret_decay(&linear).unwrap().slope.abs() < 1e-12);
        let mut holes = sqrt.clone();
        holes[0].1 = 0.0;
        assert_eq!(average_regret_decay(&holes).unwrap().excluded, vec![32]);
        assert!(matches!(average_regret_decay(&sqrt[..3]), Err(Error::DegenerateRegret { .. })));
    }

    #[test]
    fn stored_gradients_match_running_norms() {
        let q = make_quadratic_with_samples(3, 4.0, 0.3, 200, &mut SeededRng::new(9)).unwrap();
        let seq = ObjectiveSequence::cycling(Arc::new(q), 200).unwrap();
        let opts = OnlineOptions { keep_gradients: true, ..Default::default() };
        let ledger =
            run_online(&seq, &mut adam(3), &ParamVector::zeros(3), &HyperParams::regret_defaults(), &opts).unwrap();
        let grads = ledger.gradients.as_ref().unwrap();
        for (i, &norm) in ledger.grad_history_norms().iter().enumerate() {
            let direct = grads.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt();
            assert!((direct - norm).abs() <= 1e-12 * direct);
        }
        assert_eq!(ledger.nonconvex_warnings, 0);
    }
}
