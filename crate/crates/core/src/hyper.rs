use crate::error::{Error, Result};
use crate::scalar::{one_minus_pow, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AlphaSchedule {
    #[default]
    Constant,
    /// `alpha_t = alpha / sqrt(t)`
    InvSqrtT,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Beta1Schedule {
    #[default]
    Constant,
    /// `beta1_t = beta1 * lambda^(t-1)`
    ExponentialDecay,
}

/// Optimizer hyperparameters shared by Adam, AdaMax and the baselines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperParams<S> {
    pub alpha: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    /// Decay rate of `beta1` under [`Beta1Schedule::ExponentialDecay`]; 1 disables decay.
    pub lambda: S,
    pub alpha_schedule: AlphaSchedule,
    pub beta1_schedule: Beta1Schedule,
}

impl<S: Scalar> Default for HyperParams<S> {
    /// alpha = 0.001, beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    fn default() -> Self {
        Self {
            alpha: S::lit(0.001),
            beta1: S::lit(0.9),
            beta2: S::lit(0.999),
            epsilon: S::lit(1e-8),
            lambda: S::one(),
            alpha_schedule: AlphaSchedule::Constant,
            beta1_schedule: Beta1Schedule::Constant,
        }
    }
}

impl<S: Scalar> HyperParams<S> {
    /// AdaMax defaults: alpha = 0.002, beta1 = 0.9, beta2 = 0.999.
    pub fn adamax_defaults() -> Self {
        Self { alpha: S::lit(0.002), ..Self::default() }
    }

    /// Adam defaults with `alpha / sqrt(t)` decay and `beta1` decaying at lambda = 1 - 1e-8.
    pub fn regret_defaults() -> Self {
        Self {
            lambda: S::one() - S::lit(1e-8),
            alpha_schedule: AlphaSchedule::InvSqrtT,
            beta1_schedule: Beta1Schedule::ExponentialDecay,
            ..Self::default()
        }
    }

    pub fn with_alpha(mut self, alpha: S) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_betas(mut self, beta1: S, beta2: S) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_epsilon(mut self, epsilon: S) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_alpha_schedule(mut self, schedule: AlphaSchedule) -> Self {
        self.alpha_schedule = schedule;
        self
    }

    pub fn gamma(&self) -> S {
        self.beta1 * self.beta1 / self.beta2.sqrt()
    }

    /// Checks every range constraint. In regret mode additionally requires gamma < 1 and the
    /// decaying `alpha`/`beta1` schedules.
    pub fn validate(self, regret_mode: bool) -> Result<Self> {
        let range = |field: &'static str, reason: &str| Error::Range { field, reason: reason.to_owned() };
        if !(self.alpha > S::zero()) || !self.alpha.is_finite() {
            return Err(range("alpha", "must be a positive finite number"));
        }
        if !(self.beta1 >= S::zero() && self.beta1 < S::one()) {
            return Err(range("beta1", "must lie in [0, 1)"));
        }
        if !(self.beta2 >= S::zero() && self.beta2 < S::one()) {
            return Err(range("beta2", "must lie in [0, 1)"));
        }
        if !(self.epsilon >= S::zero()) || !self.epsilon.is_finite() {
            return Err(range("epsilon", "must be non-negative"));
        }
        if !(self.lambda > S::zero() && self.lambda <= S::one()) {
            return Err(range("lambda", "must lie in (0, 1]"));
        }
        if regret_mode {
            let gamma = self.gamma();
            if !(gamma < S::one()) {
                return Err(Error::Gamma { gamma: gamma.as_f64() });
            }
            if self.alpha_schedule != AlphaSchedule::InvSqrtT {
                return Err(range("alpha_schedule", "regret mode requires inv_sqrt_t"));
            }
            if self.beta1_schedule != Beta1Schedule::ExponentialDecay {
                return Err(range("beta1_schedule", "regret mode requires exponential_decay"));
            }
        }
        Ok(self)
    }

    /// Stepsize at step `t >= 1`.
    pub fn alpha_at(&self, t: u64) -> S {
        match self.alpha_schedule {
            AlphaSchedule::Constant => self.alpha,
            AlphaSchedule::InvSqrtT => self.alpha / S::from_count(t).sqrt(),
        }
    }

    /// First-moment decay at step `t >= 1`.
    pub fn beta1_at(&self, t: u64) -> S {
        match self.beta1_schedule {
            Beta1Schedule::Constant => self.beta1,
            Beta1Schedule::ExponentialDecay => {
                self.beta1 * self.lambda.powi(t.saturating_sub(1).min(i32::MAX as u64) as i32)
            }
        }
    }

    /// `1 - prod_{s=1..t} beta1_s`, the first-moment bias factor. Equals `1 - beta1^t` for a
    /// constant schedule.
    pub fn beta1_bias_factor(&self, t: u64) -> S {
        match self.beta1_schedule {
            Beta1Schedule::ExponentialDecay if self.lambda < S::one() => {
                if self.beta1 == S::zero() {
                    return S::one();
                }
                let tf = S::from_count(t);
                let log_prod = tf * self.beta1.ln()
                    + tf * (tf - S::one()) / S::lit(2.0) * self.lambda.ln();
                -log_prod.exp_m1()
            }
            _ => one_minus_pow(self.beta1, t),
        }
    }

    /// `1 - beta2^t`
    pub fn beta2_bias_factor(&self, t: u64) -> S {
        one_minus_pow(self.beta2, t)
    }
}
