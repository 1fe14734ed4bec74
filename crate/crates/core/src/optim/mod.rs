//! Optimizer update rules.
//!
//! Every step function takes the current parameters and a gradient, mutates its own state and
//! returns a [`StepReport`] whose `theta_next` is exactly `theta - delta`. State is only
//! committed when the step succeeds.

mod adam;
mod adamax;
mod baseline;

use std::fmt;
use std::str::FromStr;

pub use adam::AdamState;
pub use adamax::{adamax_u_closed_form, lp_generalized_u, AdaMaxState};
pub use baseline::{BaselineState, BaselineVariant, DEFAULT_MOMENTUM};

use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::scalar::Scalar;
use crate::vector::Vector;

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport<S> {
    pub theta_next: Vector<S>,
    /// The applied update, `theta - theta_next`.
    pub delta: Vector<S>,
    pub m_hat: Vector<S>,
    /// Bias-corrected second moment for Adam, `u` for AdaMax, the accumulator for baselines.
    pub v_hat_or_u: Vector<S>,
}

impl<S: Scalar> StepReport<S> {
    fn new(theta: &Vector<S>, delta: Vector<S>, m_hat: Vector<S>, v_hat_or_u: Vector<S>) -> Result<Self> {
        let theta_next = theta.sub(&delta)?;
        if let Some(index) = theta_next.first_non_finite() {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { theta_next, delta, m_hat, v_hat_or_u })
    }
}

pub(crate) fn check_inputs<S: Scalar>(dim: usize, theta: &Vector<S>, g: &Vector<S>) -> Result<()> {
    if theta.len() != dim {
        return Err(Error::DimMismatch { expected: dim, found: theta.len() });
    }
    if g.len() != dim {
        return Err(Error::DimMismatch { expected: dim, found: g.len() });
    }
    if let Some(index) = g.first_non_finite() {
        return Err(Error::NonFiniteGradient { index });
    }
    Ok(())
}

/// `num / den` with the 0/0 (and x/0) case mapped to a zero update component.
#[inline]
pub(crate) fn safe_ratio<S: Scalar>(num: S, den: S) -> S {
    if den == S::zero() {
        S::zero()
    } else {
        num / den
    }
}

/// Upper bound on `|delta_t|` for Adam with epsilon = 0 and a constant stepsize:
/// `alpha (1 - beta1) / sqrt(1 - beta2)` when `1 - beta1 > sqrt(1 - beta2)`, else `alpha`.
pub fn step_bound<S: Scalar>(h: &HyperParams<S>) -> S {
    let one = S::one();
    let root = (one - h.beta2).sqrt();
    if one - h.beta1 > root {
        h.alpha * (one - h.beta1) / root
    } else {
        h.alpha
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adam,
    /// Adam with the `1 - beta^t` corrections removed.
    AdamUncorrected,
    /// Adam with the reordered stepsize computation.
    AdamEfficient,
    AdaMax,
    AdaGrad,
    RmsProp,
    RmsPropMomentum,
    SgdMomentum,
    SgdNesterov,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 9] = [
        OptimizerKind::Adam,
        OptimizerKind::AdamUncorrected,
        OptimizerKind::AdamEfficient,
        OptimizerKind::AdaMax,
        OptimizerKind::AdaGrad,
        OptimizerKind::RmsProp,
        OptimizerKind::RmsPropMomentum,
        OptimizerKind::SgdMomentum,
        OptimizerKind::SgdNesterov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdamUncorrected => "adam_uncorrected",
            OptimizerKind::AdamEfficient => "adam_efficient",
            OptimizerKind::AdaMax => "adamax",
            OptimizerKind::AdaGrad => "adagrad",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::RmsPropMomentum => "rmsprop_momentum",
            OptimizerKind::SgdMomentum => "sgd_momentum",
            OptimizerKind::SgdNesterov => "sgd_nesterov",
        }
    }

    pub fn baseline_variant(self) -> Option<BaselineVariant> {
        match self {
            OptimizerKind::AdaGrad => Some(BaselineVariant::AdaGrad),
            OptimizerKind::RmsProp => Some(BaselineVariant::RmsProp),
            OptimizerKind::RmsPropMomentum => Some(BaselineVariant::RmsPropMomentum),
            OptimizerKind::SgdMomentum => Some(BaselineVariant::SgdMomentum),
            OptimizerKind::SgdNesterov => Some(BaselineVariant::SgdNesterov),
            _ => None,
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown optimizer `{s}`"))
    }
}

/// Any optimizer behind one step interface.
#[derive(Clone, Debug)]
pub enum Optimizer<S> {
    Adam { state: AdamState<S>, kind: OptimizerKind },
    AdaMax(AdaMaxState<S>),
    Baseline(BaselineState<S>),
}

impl<S: Scalar> Optimizer<S> {
    /// Zero-initialized optimizer; `rho` is the momentum coefficient for the momentum baselines.
    pub fn new(kind: OptimizerKind, dim: usize, rho: S) -> Self {
        match kind {
            OptimizerKind::Adam | OptimizerKind::AdamUncorrected | OptimizerKind::AdamEfficient => {
                Optimizer::Adam { state: AdamState::new(dim), kind }
            }
            OptimizerKind::AdaMax => Optimizer::AdaMax(AdaMaxState::new(dim)),
            _ => {
                let variant = kind.baseline_variant().expect("baseline kind");
                Optimizer::Baseline(BaselineState::new(variant, dim, rho))
            }
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Adam { kind, .. } => *kind,
            Optimizer::AdaMax(_) => OptimizerKind::AdaMax,
            Optimizer::Baseline(b) => b.variant.kind(),
        }
    }

    pub fn steps(&self) -> u64 {
        match self {
            Optimizer::Adam { state, .. } => state.t,
            Optimizer::AdaMax(s) => s.t,
            Optimizer::Baseline(b) => b.t,
        }
    }

    pub fn step(&mut self, theta: &Vector<S>, g: &Vector<S>, h: &HyperParams<S>) -> Result<StepReport<S>> {
        match self {
            Optimizer::Adam { state, kind: OptimizerKind::AdamUncorrected } => state.step_uncorrected(theta, g, h),
            Optimizer::Adam { state, kind: OptimizerKind::AdamEfficient } => state.step_efficient(theta, g, h),
            Optimizer::Adam { state, .. } => state.step(theta, g, h),
            Optimizer::AdaMax(s) => s.step(theta, g, h),
            Optimizer::Baseline(b) => b.step(theta, g, h),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_bound_regimes() {
        let h = HyperParams::<f64>::default();
        // 0.1 > sqrt(0.001) = 0.0316228, bound = 0.001 * 0.1 / 0.0316228
        assert!((step_bound(&h) - 0.003_162_277_660_168_379).abs() < 1e-15);
        let h = h.with_betas(0.9, 0.5);
        assert_eq!(step_bound(&h), 0.001);
        let h = HyperParams::<f64>::default().with_alpha(1.0).with_betas(0.0, 0.0);
        assert_eq!(step_bound(&h), 1.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in OptimizerKind::ALL {
            assert_eq!(k.name().parse::<OptimizerKind>(), Ok(k));
            assert_eq!(Optimizer::<f64>::new(k, 2, 0.9).kind(), k);
        }
        assert!("adagrad2".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn sign_sgd_case_moves_exactly_alpha() {
        let h = HyperParams::<f64>::default().with_alpha(1.0).with_betas(0.0, 0.0).with_epsilon(0.0);
        let mut s = AdamState::new(2);
        let r = s.step(&Vector::zeros(2), &Vector::new(vec![-3.0, 0.25]), &h).unwrap();
        assert_eq!(r.delta.as_slice(), &[-1.0, 1.0]);
    }
}
