use super::{check_inputs, safe_ratio, OptimizerKind, StepReport};
use crate::error::Result;
use crate::hyper::HyperParams;
use crate::scalar::Scalar;
use crate::vector::Vector;

/// Momentum coefficient used by the SGD baselines when none is configured.
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineVariant {
    /// `accum += g^2`, `theta - alpha g / (sqrt(accum) + eps)`
    AdaGrad,
    /// `accum = beta2 accum + (1 - beta2) g^2`, no bias correction
    RmsProp,
    /// RMSProp with momentum on the rescaled gradient
    RmsPropMomentum,
    /// Heavy-ball momentum, `buf = rho buf + g`, `delta = alpha buf`
    SgdMomentum,
    /// Nesterov lookahead, `buf = rho buf + g`, `delta = alpha (g + rho buf)`
    SgdNesterov,
}

impl BaselineVariant {
    pub fn kind(self) -> OptimizerKind {
        match self {
            BaselineVariant::AdaGrad => OptimizerKind::AdaGrad,
            BaselineVariant::RmsProp => OptimizerKind::RmsProp,
            BaselineVariant::RmsPropMomentum => OptimizerKind::RmsPropMomentum,
            BaselineVariant::SgdMomentum => OptimizerKind::SgdMomentum,
            BaselineVariant::SgdNesterov => OptimizerKind::SgdNesterov,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineState<S> {
    pub variant: BaselineVariant,
    pub accum: Vector<S>,
    pub momentum_buf: Vector<S>,
    pub t: u64,
    pub rho: S,
}

impl<S: Scalar> BaselineState<S> {
    pub fn new(variant: BaselineVariant, dim: usize, rho: S) -> Self {
        Self { variant, accum: Vector::zeros(dim), momentum_buf: Vector::zeros(dim), t: 0, rho }
    }

    pub fn dim(&self) -> usize {
        self.accum.len()
    }

    pub fn step(&mut self, theta: &Vector<S>, g: &Vector<S>, h: &HyperParams<S>) -> Result<StepReport<S>> {
        check_inputs(self.dim(), theta, g)?;
        let t = self.t + 1;
        let alpha = h.alpha_at(t);
        let one = S::one();
        let rho = self.rho;
        let mut accum = self.accum.clone();
        let mut buf = self.momentum_buf.clone();
        let dim = self.dim();
        let mut delta = Vector::zeros(dim);
        match self.variant {
            BaselineVariant::AdaGrad => {
                for i in 0..dim {
                    accum[i] += g[i] * g[i];
                    delta[i] = alpha * safe_ratio(g[i], accum[i].sqrt() + h.epsilon);
                }
            }
            BaselineVariant::RmsProp | BaselineVariant::RmsPropMomentum => {
                let momentum = self.variant == BaselineVariant::RmsPropMomentum;
                for i in 0..dim {
                    accum[i] = h.beta2 * accum[i] + (one - h.beta2) * g[i] * g[i];
                    let scaled = alpha * safe_ratio(g[i], accum[i].sqrt() + h.epsilon);
                    delta[i] = if momentum {
                        buf[i] = rho * buf[i] + scaled;
                        buf[i]
                    } else {
                        scaled
                    };
                }
            }
            BaselineVariant::SgdMomentum => {
                for i in 0..dim {
                    buf[i] = rho * buf[i] + g[i];
                    delta[i] = alpha * buf[i];
                }
            }
            BaselineVariant::SgdNesterov => {
                for i in 0..dim {
                    buf[i] = rho * buf[i] + g[i];
                    delta[i] = alpha * (g[i] + rho * buf[i]);
                }
            }
        }
        let report = StepReport::new(theta, delta, buf.clone(), accum.clone())?;
        self.t = t;
        self.accum = accum;
        self.momentum_buf = buf;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::AdamState;

    fn v1(x: f64) -> Vector<f64> {
        Vector::new(vec![x])
    }

    #[test]
    fn adagrad_hand_evaluation() {
        let h = HyperParams::<f64>::default().with_alpha(0.1).with_epsilon(0.0);
        let mut s = BaselineState::new(BaselineVariant::AdaGrad, 1, 0.9);
        let r = s.step(&v1(0.0), &v1(3.0), &h).unwrap();
        assert_eq!(s.accum[0], 9.0);
        assert!((r.theta_next[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_first_step_is_far_larger_than_adam() {
        let h = HyperParams::<f64>::default().with_epsilon(0.0);
        let mut s = BaselineState::new(BaselineVariant::RmsProp, 1, 0.9);
        let r = s.step(&v1(0.0), &v1(1.0), &h).unwrap();
        // alpha / sqrt(1 - beta2) = 0.001 / sqrt(0.001)
        assert!((r.delta[0] - 0.031_622_776_601_683_79).abs() < 1e-12);
        let adam = AdamState::new(1).step(&v1(0.0), &v1(1.0), &h).unwrap();
        let ratio = r.delta[0] / adam.delta[0];
        assert!((ratio - 31.622_776_601_683_79).abs() < 1e-8, "{ratio}");
    }

    #[test]
    fn zero_momentum_reduces_to_sgd() {
        let h = HyperParams::<f64>::default().with_alpha(0.5);
        for variant in [BaselineVariant::SgdMomentum, BaselineVariant::SgdNesterov] {
            let mut s = BaselineState::new(variant, 1, 0.0);
            let r = s.step(&v1(0.0), &v1(2.0), &h).unwrap();
            assert_eq!(r.delta[0], 1.0);
        }
    }

    #[test]
    fn momentum_accumulates() {
        let h = HyperParams::<f64>::default().with_alpha(1.0);
        let mut s = BaselineState::new(BaselineVariant::SgdMomentum, 1, 0.5);
        s.step(&v1(0.0), &v1(1.0), &h).unwrap();
        let r = s.step(&v1(0.0), &v1(1.0), &h).unwrap();
        assert_eq!(r.delta[0], 1.5);
        let mut n = BaselineState::new(BaselineVariant::SgdNesterov, 1, 0.5);
        let r = n.step(&v1(0.0), &v1(1.0), &h).unwrap();
        assert_eq!(r.delta[0], 1.5);
    }

    #[test]
    fn rmsprop_momentum_uses_rescaled_gradient() {
        let h = HyperParams::<f64>::default().with_alpha(1.0).with_betas(0.9, 0.0).with_epsilon(0.0);
        let mut s = BaselineState::new(BaselineVariant::RmsPropMomentum, 1, 0.5);
        s.step(&v1(0.0), &v1(4.0), &h).unwrap();
        let r = s.step(&v1(0.0), &v1(-2.0), &h).unwrap();
        // beta2 = 0 makes accum = g^2, so each rescaled gradient is sign(g)
        assert_eq!(r.delta[0], 0.5 - 1.0);
    }

    #[test]
    fn accumulators_stay_non_negative() {
        let h = HyperParams::<f64>::default();
        let mut s = BaselineState::new(BaselineVariant::RmsProp, 2, 0.9);
        for k in 0..20 {
            let g = Vector::new(vec![(k as f64).sin(), -(k as f64).cos()]);
            s.step(&Vector::zeros(2), &g, &h).unwrap();
            assert!(s.accum.iter().all(|&a| a >= 0.0));
        }
    }
}
