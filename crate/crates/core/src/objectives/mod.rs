//! Stochastic objectives, datasets, minibatch sampling and numerical gradient checks.

mod dataset;
mod gradcheck;
mod logreg;
mod quadratic;
mod sampler;

pub use dataset::{
    make_dense_planted, make_sparse_bow, parse_sparse_dataset, read_sparse_dataset, write_sparse_dataset,
    Dataset, SparseRow, ZIPF_EXPONENT,
};
pub use gradcheck::{check_gradient, FULL_CHECK_MAX_DIM, SUBSET_SIZE};
pub use logreg::{make_logreg, LogReg};
pub use quadratic::{make_quadratic, make_quadratic_with_samples, Quadratic, DEFAULT_QUADRATIC_SAMPLES};
pub use sampler::{BatchSampler, SamplingPolicy};

use crate::error::{Error, Result};
use crate::ParamVector;

/// A set of example indices, optionally with replacement feature rows (after input dropout)
/// and per-example weights. Losses are weighted means over the batch.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub features: Option<Vec<SparseRow>>,
    pub weights: Option<Vec<f64>>,
}

impl Batch {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices, features: None, weights: None }
    }

    pub fn single(index: usize) -> Self {
        Self::new(vec![index])
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[j])
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.as_ref().map_or(self.indices.len() as f64, |w| w.iter().sum())
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if let Some(&index) = self.indices.iter().find(|&&i| i >= n) {
            return Err(Error::Index { index, dim: n });
        }
        let parallel = |len: usize| {
            if len == self.indices.len() {
                Ok(())
            } else {
                Err(Error::DimMismatch { expected: self.indices.len(), found: len })
            }
        };
        if let Some(f) = &self.features {
            parallel(f.len())?;
        }
        if let Some(w) = &self.weights {
            parallel(w.len())?;
        }
        Ok(())
    }
}

/// Differentiable stochastic cost, deterministic given `(theta, batch)`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of examples the batch indices range over.
    fn num_examples(&self) -> usize;

    fn eval(&self, theta: &ParamVector, batch: &Batch) -> Result<f64>;

    fn grad(&self, theta: &ParamVector, batch: &Batch) -> Result<ParamVector>;

    /// Loss over the whole dataset.
    fn full_eval(&self, theta: &ParamVector) -> f64;

    fn full_grad(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.grad(theta, &Batch::new((0..self.num_examples()).collect()))
    }

    fn is_convex(&self) -> bool;

    /// Backing dataset for objectives that have one, used for input dropout.
    fn dataset(&self) -> Option<&Dataset> {
        None
    }
}

pub(crate) fn check_theta(dim: usize, theta: &ParamVector) -> Result<()> {
    if theta.len() == dim {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected: dim, found: theta.len() })
    }
}
