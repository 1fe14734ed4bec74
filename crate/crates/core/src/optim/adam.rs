use super::{check_inputs, safe_ratio, StepReport};
use crate::error::{Error, Result};
use crate::hyper::{Beta1Schedule, HyperParams};
use crate::scalar::Scalar;
use crate::vector::Vector;

/// Biased moment estimates and step counter. Starts at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub m: Vector<S>,
    pub v: Vector<S>,
    pub t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(dim: usize) -> Self {
        Self { m: Vector::zeros(dim), v: Vector::zeros(dim), t: 0 }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    fn advance(&self, g: &Vector<S>, h: &HyperParams<S>) -> (u64, Vector<S>, Vector<S>) {
        let t = self.t + 1;
        let b1 = h.beta1_at(t);
        let b2 = h.beta2;
        let one = S::one();
        let m = Vector::new(
            self.m.iter().zip(g.iter()).map(|(&m, &g)| b1 * m + (one - b1) * g).collect(),
        );
        let v = Vector::new(
            self.v.iter().zip(g.iter()).map(|(&v, &g)| b2 * v + (one - b2) * g * g).collect(),
        );
        (t, m, v)
    }

    fn commit(&mut self, t: u64, m: Vector<S>, v: Vector<S>) {
        self.t = t;
        self.m = m;
        self.v = v;
    }

    /// Bias-corrected `(m_hat, v_hat)` of the current state.
    pub fn bias_corrected_moments(&self, h: &HyperParams<S>) -> Result<(Vector<S>, Vector<S>)> {
        if self.t == 0 {
            return Err(Error::ZeroSteps);
        }
        let c1 = h.beta1_bias_factor(self.t);
        let c2 = h.beta2_bias_factor(self.t);
        Ok((self.m.map(|x| x / c1), self.v.map(|x| x / c2)))
    }

    /// One Adam step in the canonical order: update moments, bias-correct, then
    /// `theta - alpha_t * m_hat / (sqrt(v_hat) + epsilon)`.
    pub fn step(&mut self, theta: &Vector<S>, g: &Vector<S>, h: &HyperParams<S>) -> Result<StepReport<S>> {
        check_inputs(self.dim(), theta, g)?;
        let (t, m, v) = self.advance(g, h);
        let c1 = h.beta1_bias_factor(t);
        let c2 = h.beta2_bias_factor(t);
        let m_hat = m.map(|x| x / c1);
        let v_hat = v.map(|x| x / c2);
        let alpha_t = h.alpha_at(t);
        let delta = m_hat
            .zip_map(&v_hat, |mh, vh| alpha_t * safe_ratio(mh, vh.sqrt() + h.epsilon))
            .expect("lengths checked");
        let report = StepReport::new(theta, delta, m_hat, v_hat)?;
        self.commit(t, m, v);
        Ok(report)
    }

    /// Reordered form: `alpha_t' = alpha_t sqrt(1 - beta2^t) / (1 - beta1^t)` and
    /// `theta - alpha_t' * m / (sqrt(v) + eps_hat)` with `eps_hat = epsilon * sqrt(1 - beta2^t)`,
    /// which makes it coincide with [`AdamState::step`] for every epsilon.
    pub fn step_efficient(&mut self, theta: &Vector<S>, g: &Vector<S>, h: &HyperParams<S>) -> Result<StepReport<S>> {
        if h.beta1_schedule != Beta1Schedule::Constant {
            return Err(Error::ScheduledBeta1("the reordered Adam step"));
        }
        check_inputs(self.dim(), theta, g)?;
        let (t, m, v) = self.advance(g, h);
        let c1 = h.beta1_bias_factor(t);
        let root_c2 = h.beta2_bias_factor(t).sqrt();
        let step_size = h.alpha_at(t) * root_c2 / c1;
        let eps_hat = h.epsilon * root_c2;
        let delta = m
            .zip_map(&v, |m, v| step_size * safe_ratio(m, v.sqrt() + eps_hat))
            .expect("lengths checked");
        let c2 = root_c2 * root_c2;
        let report = StepReport::new(theta, delta, m.map(|x| x / c1), v.map(|x| x / c2))?;
        self.commit(t, m, v);
        Ok(report)
    }

    /// Adam without initialization bias correction: `theta - alpha_t * m / (sqrt(v) + epsilon)`.
    pub fn step_uncorrected(&mut self, theta: &Vector<S>, g: &Vector<S>, h: &HyperParams<S>) -> Result<StepReport<S>> {
        check_inputs(self.dim(), theta, g)?;
        let (t, m, v) = self.advance(g, h);
        let alpha_t = h.alpha_at(t);
        let delta = m
            .zip_map(&v, |m, v| alpha_t * safe_ratio(m, v.sqrt() + h.epsilon))
            .expect("lengths checked");
        let report = StepReport::new(theta, delta, m.clone(), v.clone())?;
        self.commit(t, m, v);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::AlphaSchedule;
    use crate::rng::SeededRng;

    fn v1(x: f64) -> Vector<f64> {
        Vector::new(vec![x])
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    // Hand evaluation of one step at the defaults with theta = 1, g = 1:
    // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1, theta' = 1 - 0.001 / (1 + 1e-8).
    #[test]
    fn first_step_matches_hand_evaluation() {
        let h = HyperParams::<f64>::default();
        let mut s = AdamState::new(1);
        let r = s.step(&v1(1.0), &v1(1.0), &h).unwrap();
        assert_eq!(s.t, 1);
        assert!(close(s.m[0], 0.1, 1e-15));
        assert!(close(s.v[0], 0.001, 1e-15));
        assert!(close(r.m_hat[0], 1.0, 1e-15));
        assert!(close(r.v_hat_or_u[0], 1.0, 1e-12));
        let want = 1.0 - 0.001 / (1.0 + 1e-8);
        assert!(close(r.theta_next[0], want, 1e-15));
        assert!((r.theta_next[0] - 0.999).abs() < 1e-10);
    }

    #[test]
    fn zero_gradients_are_a_fixed_point() {
        let h = HyperParams::<f64>::default();
        let mut s = AdamState::new(3);
        let theta = Vector::new(vec![1.0, -2.0, 0.5]);
        for _ in 0..100 {
            let r = s.step(&theta, &Vector::zeros(3), &h).unwrap();
            assert_eq!(r.theta_next, theta);
        }
        assert_eq!(s.m, Vector::zeros(3));
        assert_eq!(s.v, Vector::zeros(3));
        // same with epsilon = 0: the 0/0 components are defined as zero
        let mut s = AdamState::new(3);
        let r = s.step(&theta, &Vector::zeros(3), &h.with_epsilon(0.0)).unwrap();
        assert_eq!(r.theta_next, theta);
    }

    #[test]
    fn gradient_scale_does_not_change_steps() {
        let h = HyperParams::<f64>::default().with_epsilon(0.0);
        let mut rng = SeededRng::new(5);
        let gs: Vec<Vector<f64>> = (0..40).map(|_| Vector::new((0..4).map(|_| rng.normal()).collect())).collect();
        let mut a = AdamState::new(4);
        let mut b = AdamState::new(4);
        let theta = Vector::zeros(4);
        for g in &gs {
            let ra = a.step(&theta, g, &h).unwrap();
            let rb = b.step(&theta, &g.scale(100.0), &h).unwrap();
            for i in 0..4 {
                assert!(close(ra.delta[i], rb.delta[i], 1e-12));
            }
        }
    }

    #[test]
    fn efficient_form_single_step_agrees() {
        let h = HyperParams::<f64>::default().with_epsilon(0.0);
        let r1 = AdamState::new(1).step(&v1(1.0), &v1(1.0), &h).unwrap();
        let r2 = AdamState::new(1).step_efficient(&v1(1.0), &v1(1.0), &h).unwrap();
        // the two orderings round differently; agreement is to the last couple of ulps
        assert!(close(r1.theta_next[0], r2.theta_next[0], 4.0 * f64::EPSILON));
    }

    #[test]
    fn efficient_form_zero_gradients_keep_theta() {
        let h = HyperParams::<f64>::default();
        let theta = Vector::new(vec![0.3, 0.7]);
        let mut s = AdamState::new(2);
        for _ in 0..5 {
            assert_eq!(s.step_efficient(&theta, &Vector::zeros(2), &h).unwrap().theta_next, theta);
        }
    }

    #[test]
    fn efficient_form_rejects_scheduled_beta1() {
        let h = HyperParams::<f64>::regret_defaults();
        let mut s = AdamState::new(1);
        assert!(matches!(s.step_efficient(&v1(0.0), &v1(1.0), &h), Err(Error::ScheduledBeta1(_))));
        assert_eq!(s.t, 0);
    }

    #[test]
    fn errors_leave_state_untouched() {
        let h = HyperParams::<f64>::default();
        let mut s = AdamState::new(2);
        assert_eq!(
            s.step(&Vector::zeros(2), &v1(1.0), &h),
            Err(Error::DimMismatch { expected: 2, found: 1 })
        );
        assert_eq!(
            s.step(&Vector::zeros(2), &Vector::new(vec![1.0, f64::NAN]), &h),
            Err(Error::NonFiniteGradient { index: 1 })
        );
        assert_eq!(s, AdamState::new(2));
    }

    #[test]
    fn bias_corrected_moments_of_constant_gradient() {
        // v_3 = (1 - 0.9^3) * 4 = 1.084 and v_hat_3 = 4
        let h = HyperParams::<f64>::default().with_betas(0.9, 0.9);
        let mut s = AdamState::new(1);
        assert_eq!(s.bias_corrected_moments(&h), Err(Error::ZeroSteps));
        for _ in 0..3 {
            s.step(&v1(0.0), &v1(2.0), &h).unwrap();
        }
        assert!(close(s.v[0], 1.084, 1e-14));
        let (m_hat, v_hat) = s.bias_corrected_moments(&h).unwrap();
        assert!(close(v_hat[0], 4.0, 1e-14));
        assert!(close(m_hat[0], 2.0, 1e-14));
    }

    #[test]
    fn first_step_is_fully_corrected() {
        for &(b1, b2) in &[(0.0, 0.0), (0.5, 0.9), (0.9, 0.999), (0.99, 0.9999)] {
            let h = HyperParams::<f64>::default().with_betas(b1, b2);
            let mut s = AdamState::new(1);
            s.step(&v1(0.0), &v1(-1.5), &h).unwrap();
            let (m_hat, v_hat) = s.bias_corrected_moments(&h).unwrap();
            assert!(close(m_hat[0], -1.5, 1e-12), "{b1} {b2}");
            assert!(close(v_hat[0], 2.25, 1e-12), "{b1} {b2}");
        }
    }

    #[test]
    fn uncorrected_first_step_is_much_larger() {
        let h = HyperParams::<f64>::default().with_epsilon(0.0);
        let rc = AdamState::new(1).step(&v1(0.0), &v1(1.0), &h).unwrap();
        let ru = AdamState::new(1).step_uncorrected(&v1(0.0), &v1(1.0), &h).unwrap();
        // corrected: alpha; uncorrected: alpha * 0.1 / sqrt(0.001)
        assert!(close(rc.delta[0], 0.001, 1e-12));
        assert!(close(ru.delta[0], 0.001 * 0.1 / 0.001f64.sqrt(), 1e-12));
    }

    #[test]
    fn inv_sqrt_schedule_scales_steps() {
        let h = HyperParams::<f64>::default()
            .with_epsilon(0.0)
            .with_betas(0.0, 0.0)
            .with_alpha_schedule(AlphaSchedule::InvSqrtT);
        let mut s = AdamState::new(1);
        s.step(&v1(0.0), &v1(1.0), &h).unwrap();
        s.step(&v1(0.0), &v1(1.0), &h).unwrap();
        s.step(&v1(0.0), &v1(1.0), &h).unwrap();
        let r = s.step(&v1(0.0), &v1(1.0), &h).unwrap();
        assert!(close(r.delta[0], 0.0005, 1e-15));
    }

    #[test]
    fn single_precision_step() {
        let h = HyperParams::<f32>::default();
        let mut s = AdamState::<f32>::new(1);
        let r = s.step(&Vector::new(vec![1.0f32]), &Vector::new(vec![1.0f32]), &h).unwrap();
        assert!((r.theta_next[0] - 0.999).abs() < 1e-6);
    }
}
