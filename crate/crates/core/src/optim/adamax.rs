use super::{check_inputs, safe_ratio, StepReport};
use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::scalar::{one_minus_pow, Scalar};
use crate::vector::Vector;

/// First moment plus the exponentially weighted infinity norm `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaMaxState<S> {
    pub m: Vector<S>,
    pub u: Vector<S>,
    pub t: u64,
}

impl<S: Scalar> AdaMaxState<S> {
    pub fn new(dim: usize) -> Self {
        Self { m: Vector::zeros(dim), u: Vector::zeros(dim), t: 0 }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// `m <- beta1 m + (1 - beta1) g`, `u <- max(beta2 u, |g|)`,
    /// `theta - (alpha_t / (1 - beta1^t)) m / u`. Epsilon is unused and `beta1` is always
    /// taken as constant.
    pub fn step(&mut self, theta: &Vector<S>, g: &Vector<S>, h: &HyperParams<S>) -> Result<StepReport<S>> {
        check_inputs(self.dim(), theta, g)?;
        let t = self.t + 1;
        let (b1, b2) = (h.beta1, h.beta2);
        let one = S::one();
        let m = Vector::new(self.m.iter().zip(g.iter()).map(|(&m, &g)| b1 * m + (one - b1) * g).collect());
        let u = Vector::new(self.u.iter().zip(g.iter()).map(|(&u, &g)| (b2 * u).max(g.abs())).collect());
        let step_size = h.alpha_at(t) / one_minus_pow(b1, t);
        let delta = m.zip_map(&u, |m, u| step_size * safe_ratio(m, u)).expect("lengths checked");
        let m_hat = m.scale(one / one_minus_pow(b1, t));
        let report = StepReport::new(theta, delta, m_hat, u.clone())?;
        self.t = t;
        self.m = m;
        self.u = u;
        Ok(report)
    }
}

fn check_sequence<S: Scalar>(gs: &[Vector<S>]) -> Result<usize> {
    let first = gs.first().ok_or(Error::EmptySequence)?;
    for g in gs {
        first.check_len(g)?;
    }
    Ok(first.len())
}

/// `max_i beta2^(t-i) |g_i|` elementwise over the whole sequence.
pub fn adamax_u_closed_form<S: Scalar>(gs: &[Vector<S>], beta2: S) -> Result<Vector<S>> {
    let dim = check_sequence(gs)?;
    let t = gs.len();
    let mut out = Vector::<S>::zeros(dim);
    for (i, g) in gs.iter().enumerate() {
        let w = beta2.powi((t - 1 - i) as i32);
        for k in 0..dim {
            out[k] = out[k].max(w * g[k].abs());
        }
    }
    Ok(out)
}

/// `v_t^(1/p)` with `v_t = (1 - beta2^p) sum_i beta2^(p (t-i)) |g_i|^p`.
///
/// Evaluated directly when the powers stay representable, otherwise through a log-sum-exp.
pub fn lp_generalized_u<S: Scalar>(gs: &[Vector<S>], beta2: S, p: u32) -> Result<Vector<S>> {
    if p == 0 {
        return Err(Error::Range { field: "p", reason: "must be >= 1".into() });
    }
    let dim = check_sequence(gs)?;
    let t = gs.len();
    let pf = S::from_count(p as u64);
    let lead = one_minus_pow(beta2, p as u64);
    let log_max = S::max_value().ln() - S::from_count(t as u64).ln() - S::one();
    let log_min = S::min_positive_value().ln() + S::one();
    let mut out = Vector::zeros(dim);
    for k in 0..dim {
        let column: Vec<S> = gs.iter().map(|g| g[k].abs()).collect();
        let peak = column.iter().fold(S::zero(), |a, &b| a.max(b));
        if peak == S::zero() {
            continue;
        }
        let log_peak = pf * peak.ln();
        let value = if log_peak < log_max && log_peak > log_min {
            let sum = column.iter().enumerate().fold(S::zero(), |acc, (i, &a)| {
                acc + (beta2.powi((t - 1 - i) as i32) * a).powi(p as i32)
            });
            (lead * sum).powf(S::one() / pf)
        } else {
            log_space_root(&column, beta2, pf, lead)
        };
        if !value.is_finite() {
            return Err(Error::Overflow { p });
        }
        out[k] = value;
    }
    Ok(out)
}

fn log_space_root<S: Scalar>(column: &[S], beta2: S, pf: S, lead: S) -> S {
    let t = column.len();
    let logs: Vec<S> = column
        .iter()
        .enumerate()
        .filter(|(i, &a)| a > S::zero() && (beta2 > S::zero() || *i == t - 1))
        .map(|(i, &a)| {
            let lag = S::from_count((t - 1 - i) as u64);
            let decay = if lag == S::zero() { S::zero() } else { lag * beta2.ln() };
            pf * (decay + a.ln())
        })
        .collect();
    let top = logs.iter().fold(S::neg_infinity(), |a, &b| a.max(b));
    let lse = top + logs.iter().fold(S::zero(), |acc, &l| acc + (l - top).exp()).ln();
    ((lead.ln() + lse) / pf).exp()
}
