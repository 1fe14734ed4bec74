use super::{check_theta, Batch, Objective};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::ParamVector;

pub const DEFAULT_QUADRATIC_SAMPLES: usize = 1024;

/// Finite-sum diagonal quadratic. Example `i` has cost
/// `1/2 sum_k d_k (theta_k - c_k)^2 + xi_i . (theta - c)`, where the noise vectors `xi_i` are
/// drawn once with standard deviation `noise_std` and centered so that their mean is zero.
/// The full objective is therefore the noiseless quadratic minimized at `c`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    curvature: Vec<f64>,
    center: ParamVector,
    noise: Vec<ParamVector>,
    samples: usize,
    noise_std: f64,
}

impl Quadratic {
    pub fn new(curvature: Vec<f64>, center: ParamVector, noise_std: f64, samples: usize, rng: &mut SeededRng) -> Result<Self> {
        if curvature.is_empty() {
            return Err(Error::Range { field: "dim", reason: "must be at least 1".into() });
        }
        if curvature.len() != center.len() {
            return Err(Error::DimMismatch { expected: curvature.len(), found: center.len() });
        }
        if curvature.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Range { field: "curvature", reason: "must be positive".into() });
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::Range { field: "noise_std", reason: "must be non-negative".into() });
        }
        if samples == 0 {
            return Err(Error::Range { field: "samples", reason: "must be at least 1".into() });
        }
        let dim = curvature.len();
        let noise = if noise_std > 0.0 {
            let mut draws: Vec<ParamVector> = (0..samples)
                .map(|_| ParamVector::new((0..dim).map(|_| rng.normal() * noise_std).collect()))
                .collect();
            let mut mean = ParamVector::zeros(dim);
            for d in &draws {
                mean.axpy(1.0 / samples as f64, d)?;
            }
            for d in &mut draws {
                *d = d.sub(&mean)?;
            }
            draws
        } else {
            Vec::new()
        };
        Ok(Self { curvature, center, noise, samples, noise_std })
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn center(&self) -> &ParamVector {
        &self.center
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn noise(&self, i: usize) -> Option<&ParamVector> {
        self.noise.get(i)
    }

    fn deterministic(&self, theta: &ParamVector) -> f64 {
        0.5 * self
            .curvature
            .iter()
            .zip(theta.iter().zip(self.center.iter()))
            .map(|(d, (x, c))| d * (x - c) * (x - c))
            .sum::<f64>()
    }

    fn linear_noise(&self, theta: &ParamVector, batch: &Batch) -> f64 {
        if self.noise.is_empty() {
            return 0.0;
        }
        let mut acc = 0.0;
        for (j, &i) in batch.indices.iter().enumerate() {
            let xi = &self.noise[i];
            let dot: f64 = xi.iter().zip(theta.iter().zip(self.center.iter())).map(|(n, (x, c))| n * (x - c)).sum();
            acc += batch.weight(j) * dot;
        }
        acc / batch.total_weight()
    }
}

/// Quadratic with curvatures log-spaced in `[1, condition_number]` and a standard normal
/// minimizer.
pub fn make_quadratic(dim: usize, condition_number: f64, noise_std: f64, rng: &mut SeededRng) -> Result<Quadratic> {
    make_quadratic_with_samples(dim, condition_number, noise_std, DEFAULT_QUADRATIC_SAMPLES, rng)
}

pub fn make_quadratic_with_samples(
    dim: usize,
    condition_number: f64,
    noise_std: f64,
    samples: usize,
    rng: &mut SeededRng,
) -> Result<Quadratic> {
    if dim == 0 {
        return Err(Error::Range { field: "dim", reason: "must be at least 1".into() });
    }
    if !(condition_number >= 1.0 && condition_number.is_finite()) {
        return Err(Error::Range { field: "condition_number", reason: "must be >= 1".into() });
    }
    let curvature: Vec<f64> = if dim == 1 {
        vec![1.0]
    } else {
        (0..dim).map(|k| condition_number.powf(k as f64 / (dim - 1) as f64)).collect()
    };
    let center = ParamVector::new((0..dim).map(|_| rng.normal()).collect());
    Quadratic::new(curvature, center, noise_std, samples, rng)
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn num_examples(&self) -> usize {
        self.samples
    }

    fn eval(&self, theta: &ParamVector, batch: &Batch) -> Result<f64> {
        check_theta(self.dim(), theta)?;
        batch.check(self.samples)?;
        Ok(self.deterministic(theta) + self.linear_noise(theta, batch))
    }

    fn grad(&self, theta: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        check_theta(self.dim(), theta)?;
        batch.check(self.samples)?;
        let mut g = ParamVector::new(
            self.curvature.iter().zip(theta.iter().zip(self.center.iter())).map(|(d, (x, c))| d * (x - c)).collect(),
        );
        if !self.noise.is_empty() {
            let total = batch.total_weight();
            for (j, &i) in batch.indices.iter().enumerate() {
                g.axpy(batch.weight(j) / total, &self.noise[i])?;
            }
        }
        Ok(g)
    }

    fn full_eval(&self, theta: &ParamVector) -> f64 {
        self.deterministic(theta)
    }

    fn is_convex(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_quadratic_gradient() {
        let q = Quadratic::new(vec![1.0], ParamVector::zeros(1), 0.0, 1, &mut SeededRng::new(0)).unwrap();
        let g = q.grad(&ParamVector::new(vec![3.0]), &Batch::single(0)).unwrap();
        assert_eq!(g.as_slice(), &[3.0]);
        assert_eq!(q.eval(&ParamVector::new(vec![3.0]), &Batch::single(0)).unwrap(), 4.5);
    }

    #[test]
    fn condition_number_is_respected() {
        let q = make_quadratic(2, 10.0, 0.0, &mut SeededRng::new(1)).unwrap();
        let d = q.curvature();
        let ratio = d.iter().cloned().fold(0.0, f64::max) / d.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((ratio - 10.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_evaluations_are_deterministic() {
        let q = make_quadratic(4, 5.0, 0.1, &mut SeededRng::new(2)).unwrap();
        let theta = ParamVector::new(vec![0.1, 0.2, 0.3, 0.4]);
        let b = Batch::single(17);
        assert_eq!(q.eval(&theta, &b).unwrap(), q.eval(&theta, &b).unwrap());
        assert_eq!(q.grad(&theta, &b).unwrap(), q.grad(&theta, &b).unwrap());
        assert_ne!(q.grad(&theta, &b).unwrap(), q.grad(&theta, &Batch::single(18)).unwrap());
    }

    #[test]
    fn full_gradient_vanishes_at_center() {
        let q = make_quadratic(3, 4.0, 0.5, &mut SeededRng::new(3)).unwrap();
        let g = q.full_grad(q.center()).unwrap();
        assert!(g.norm_inf() < 1e-12, "{g:?}");
    }

    #[test]
    fn rejects_bad_batches() {
        let q = make_quadratic(2, 1.0, 0.0, &mut SeededRng::new(4)).unwrap();
        let theta = ParamVector::zeros(2);
        assert_eq!(q.eval(&theta, &Batch::new(vec![])), Err(Error::EmptyBatch));
        assert!(matches!(q.eval(&theta, &Batch::single(5000)), Err(Error::Index { .. })));
        assert!(matches!(q.eval(&ParamVector::zeros(3), &Batch::single(0)), Err(Error::DimMismatch { .. })));
    }
}
