//! Temporal averaging of iterates. A read-only tap on the parameter stream; it never feeds
//! back into the optimizer.

use crate::error::{Error, Result};
use crate::scalar::{one_minus_pow, Scalar};
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AveragingMode {
    /// Running arithmetic mean of all iterates.
    Polyak,
    /// Exponential moving average with `1 - beta^t` bias correction.
    Ema,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AveragerState<S> {
    pub mode: AveragingMode,
    pub bar_theta: Vector<S>,
    pub count: u64,
    pub beta: S,
}

impl<S: Scalar> AveragerState<S> {
    pub fn polyak(dim: usize) -> Self {
        Self { mode: AveragingMode::Polyak, bar_theta: Vector::zeros(dim), count: 0, beta: S::zero() }
    }

    /// EMA averager; pass the optimizer's `beta2` to follow the usual convention.
    pub fn ema(dim: usize, beta: S) -> Self {
        Self { mode: AveragingMode::Ema, bar_theta: Vector::zeros(dim), count: 0, beta }
    }

    /// Folds in one iterate and returns the current estimate.
    pub fn update(&mut self, theta: &Vector<S>) -> Result<Vector<S>> {
        if theta.len() != self.bar_theta.len() {
            return Err(Error::DimMismatch { expected: self.bar_theta.len(), found: theta.len() });
        }
        self.count += 1;
        match self.mode {
            AveragingMode::Polyak => {
                let n = S::from_count(self.count);
                for (b, &x) in self.bar_theta.as_mut_slice().iter_mut().zip(theta.iter()) {
                    *b += (x - *b) / n;
                }
            }
            AveragingMode::Ema => {
                let beta = self.beta;
                let one = S::one();
                for (b, &x) in self.bar_theta.as_mut_slice().iter_mut().zip(theta.iter()) {
                    *b = beta * *b + (one - beta) * x;
                }
            }
        }
        Ok(self.estimate())
    }

    /// Current average; for EMA this is `bar_theta / (1 - beta^t)`. Zero before any update.
    pub fn estimate(&self) -> Vector<S> {
        match self.mode {
            AveragingMode::Polyak => self.bar_theta.clone(),
            AveragingMode::Ema if self.count == 0 => self.bar_theta.clone(),
            AveragingMode::Ema => {
                let c = one_minus_pow(self.beta, self.count);
                self.bar_theta.map(|x| x / c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn ema_of_constant_is_exact() {
        for &beta in &[0.0, 0.5, 0.9, 0.999, 0.9999] {
            let mut a = AveragerState::<f64>::ema(1, beta);
            for t in 1..=2000 {
                let est = a.update(&Vector::new(vec![5.0])).unwrap();
                assert!((est[0] - 5.0).abs() <= 1e-12 * 5.0, "beta {beta} t {t}: {}", est[0]);
            }
        }
    }

    #[test]
    fn polyak_mean_of_two() {
        let mut a = AveragerState::polyak(1);
        a.update(&Vector::new(vec![1.0])).unwrap();
        assert_eq!(a.update(&Vector::new(vec![3.0])).unwrap()[0], 2.0);
    }

    #[test]
    fn ema_hand_evaluation() {
        // bar_2 = 0.9 * 0.1 + 0.1 * 2 = 0.29, corrected 0.29 / 0.19
        let mut a = AveragerState::<f64>::ema(1, 0.9);
        a.update(&Vector::new(vec![1.0])).unwrap();
        let est = a.update(&Vector::new(vec![2.0])).unwrap();
        assert!((a.bar_theta[0] - 0.29).abs() < 1e-15);
        assert!((est[0] - 0.29 / 0.19).abs() < 1e-14);
        assert!((est[0] - 1.5263).abs() < 1e-4);
    }

    #[test]
    fn ema_starts_at_zero() {
        let a = AveragerState::<f64>::ema(3, 0.9);
        assert_eq!(a.estimate(), Vector::zeros(3));
    }

    #[test]
    fn dimension_is_checked() {
        let mut a = AveragerState::<f64>::polyak(2);
        assert_eq!(a.update(&Vector::zeros(3)), Err(Error::DimMismatch { expected: 2, found: 3 }));
    }

    #[test]
    fn polyak_matches_batch_mean() {
        let mut rng = SeededRng::new(11);
        let history: Vec<Vector<f64>> =
            (0..500).map(|_| Vector::new((0..3).map(|_| rng.normal() * 10.0 + 3.0).collect())).collect();
        let mut a = AveragerState::polyak(3);
        for th in &history {
            a.update(th).unwrap();
        }
        for k in 0..3 {
            let batch: f64 = history.iter().map(|v| v[k]).sum::<f64>() / history.len() as f64;
            assert!((a.estimate()[k] - batch).abs() <= 1e-12 * batch.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn ema_estimate_is_convex_combination(
            xs in proptest::collection::vec(-100.0f64..100.0, 1..200),
            beta in 0.0f64..0.9999,
        ) {
            let mut a = AveragerState::<f64>::ema(1, beta);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &x in &xs {
                lo = lo.min(x);
                hi = hi.max(x);
                let est = a.update(&Vector::new(vec![x])).unwrap()[0];
                let slack = 1e-9 * hi.abs().max(lo.abs()).max(1.0);
                prop_assert!(est >= lo - slack && est <= hi + slack);
            }
        }
    }
}
