use super::{Batch, Objective};
use crate::error::Result;
use crate::rng::SeededRng;
use crate::ParamVector;

/// Objectives up to this dimension are checked on every coordinate.
pub const FULL_CHECK_MAX_DIM: usize = 256;
/// Number of random coordinates probed above [`FULL_CHECK_MAX_DIM`].
pub const SUBSET_SIZE: usize = 64;

/// Largest relative discrepancy between the analytic gradient and central differences
/// `(f(theta + h e_i) - f(theta - h e_i)) / 2h`, with denominator `max(1, |analytic_i|)`.
///
/// Choosing `h_fd` is the caller's business: very small steps are dominated by cancellation.
pub fn check_gradient(
    obj: &dyn Objective,
    theta: &ParamVector,
    batch: &Batch,
    h_fd: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let analytic = obj.grad(theta, batch)?;
    let dim = obj.dim();
    let coords: Vec<usize> = if dim <= FULL_CHECK_MAX_DIM {
        (0..dim).collect()
    } else {
        let mut all: Vec<usize> = (0..dim).collect();
        rng.shuffle(&mut all);
        all.truncate(SUBSET_SIZE);
        all
    };
    let mut probe = theta.clone();
    let mut worst = 0.0f64;
    for i in coords {
        let x = probe[i];
        probe[i] = x + h_fd;
        let up = obj.eval(&probe, batch)?;
        probe[i] = x - h_fd;
        let down = obj.eval(&probe, batch)?;
        probe[i] = x;
        let fd = (up - down) / (2.0 * h_fd);
        worst = worst.max((fd - analytic[i]).abs() / analytic[i].abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Quadratic;

    #[test]
    fn square_is_exact_for_central_differences() {
        // f = 1/2 * 2 * theta^2 = theta^2
        let q = Quadratic::new(vec![2.0], ParamVector::zeros(1), 0.0, 1, &mut SeededRng::new(0)).unwrap();
        let theta = ParamVector::new(vec![3.0]);
        assert_eq!(q.grad(&theta, &Batch::single(0)).unwrap()[0], 6.0);
        let err = check_gradient(&q, &theta, &Batch::single(0), 1e-5, &mut SeededRng::new(0)).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        struct Wrong;
        impl Objective for Wrong {
            fn dim(&self) -> usize {
                1
            }
            fn num_examples(&self) -> usize {
                1
            }
            fn eval(&self, theta: &ParamVector, _: &Batch) -> Result<f64> {
                Ok(theta[0].powi(3))
            }
            fn grad(&self, theta: &ParamVector, _: &Batch) -> Result<ParamVector> {
                Ok(ParamVector::new(vec![2.0 * theta[0]]))
            }
            fn full_eval(&self, theta: &ParamVector) -> f64 {
                theta[0].powi(3)
            }
            fn is_convex(&self) -> bool {
                false
            }
        }
        let err = check_gradient(&Wrong, &ParamVector::new(vec![2.0]), &Batch::single(0), 1e-5, &mut SeededRng::new(0))
            .unwrap();
        assert!(err > 0.5);
    }
}
