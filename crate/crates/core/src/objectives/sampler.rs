use super::{Batch, Dataset};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SamplingPolicy {
    /// Fresh permutation each epoch; the last batch of an epoch may be short.
    #[default]
    ShuffleEachEpoch,
    IidWithReplacement,
}

/// Minibatch index stream with optional inverted input dropout.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    rng: SeededRng,
    batch_size: usize,
    policy: SamplingPolicy,
    dropout_p: f64,
    order: Vec<usize>,
    cursor: usize,
    examples_seen: u64,
}

impl BatchSampler {
    pub fn new(rng: SeededRng, batch_size: usize, policy: SamplingPolicy, dropout_p: f64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Range { field: "batch_size", reason: "must be positive".into() });
        }
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(Error::Range { field: "dropout_p", reason: "must lie in [0, 1)".into() });
        }
        Ok(Self { rng, batch_size, policy, dropout_p, order: Vec::new(), cursor: 0, examples_seen: 0 })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn dropout_p(&self) -> f64 {
        self.dropout_p
    }

    /// Examples drawn so far, in units of dataset passes.
    pub fn epochs_elapsed(&self, n: usize) -> f64 {
        self.examples_seen as f64 / n as f64
    }

    /// True when the last shuffled batch closed an epoch.
    pub fn at_epoch_boundary(&self) -> bool {
        self.policy == SamplingPolicy::ShuffleEachEpoch && !self.order.is_empty() && self.cursor == self.order.len()
    }

    pub fn next_indices(&mut self, n: usize) -> Result<Vec<usize>> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let out = match self.policy {
            SamplingPolicy::ShuffleEachEpoch => {
                if self.batch_size > n {
                    return Err(Error::BatchTooLarge { batch_size: self.batch_size, n });
                }
                if self.order.len() != n || self.cursor == n {
                    self.order = (0..n).collect();
                    self.rng.shuffle(&mut self.order);
                    self.cursor = 0;
                }
                let end = (self.cursor + self.batch_size).min(n);
                let out = self.order[self.cursor..end].to_vec();
                self.cursor = end;
                out
            }
            SamplingPolicy::IidWithReplacement => (0..self.batch_size).map(|_| self.rng.below(n)).collect(),
        };
        self.examples_seen += out.len() as u64;
        Ok(out)
    }

    /// Next batch over `data`. With `dropout_p > 0` every active feature is zeroed with
    /// probability `dropout_p` and survivors are scaled by `1 / (1 - dropout_p)`.
    pub fn sample_batch(&mut self, data: &Dataset) -> Result<Batch> {
        let indices = self.next_indices(data.len())?;
        if self.dropout_p == 0.0 {
            return Ok(Batch::new(indices));
        }
        let keep = 1.0 - self.dropout_p;
        let scale = 1.0 / keep;
        let rng = &mut self.rng;
        let features = indices
            .iter()
            .map(|&i| data.row(i).retain(|_, _| rng.uniform() < keep).map_values(|x| x * scale))
            .collect();
        Ok(Batch { indices, features: Some(features), weights: None })
    }
}
