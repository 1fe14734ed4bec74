use std::sync::Arc;

use super::{check_theta, Batch, Dataset, Objective, SparseRow};
use crate::error::{Error, Result};
use crate::ParamVector;

/// L2-regularized multinomial logistic regression. Parameters are laid out feature-major,
/// `theta[j * K + k]` being the weight of feature `j` for class `k`, so a sparse row touches
/// only `K` contiguous coordinates per active feature.
#[derive(Clone, Debug)]
pub struct LogReg {
    data: Arc<Dataset>,
    l2: f64,
}

pub fn make_logreg(data: impl Into<Arc<Dataset>>, l2: f64) -> Result<LogReg> {
    let data = data.into();
    if data.n_classes() < 2 {
        return Err(Error::Range { field: "classes", reason: "logistic regression needs K >= 2".into() });
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::Range { field: "l2", reason: "must be non-negative".into() });
    }
    Ok(LogReg { data, l2 })
}

impl LogReg {
    pub fn l2(&self) -> f64 {
        self.l2
    }

    fn classes(&self) -> usize {
        self.data.n_classes()
    }

    fn scores(&self, theta: &ParamVector, row: &SparseRow, out: &mut [f64]) {
        let k = self.classes();
        out.iter_mut().for_each(|s| *s = 0.0);
        let th = theta.as_slice();
        for &(j, x) in row.entries() {
            let w = &th[j * k..(j + 1) * k];
            for (s, &wk) in out.iter_mut().zip(w) {
                *s += x * wk;
            }
        }
    }

    fn log_sum_exp(scores: &[f64]) -> f64 {
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + scores.iter().map(|s| (s - top).exp()).sum::<f64>().ln()
    }

    fn regularizer(&self, theta: &ParamVector) -> f64 {
        if self.l2 == 0.0 {
            0.0
        } else {
            0.5 * self.l2 * theta.iter().map(|x| x * x).sum::<f64>()
        }
    }

    fn row<'a>(&'a self, batch: &'a Batch, j: usize) -> &'a SparseRow {
        match &batch.features {
            Some(rows) => &rows[j],
            None => self.data.row(batch.indices[j]),
        }
    }

    fn check_rows(&self, batch: &Batch) -> Result<()> {
        if let Some(rows) = &batch.features {
            if let Some(r) = rows.iter().find(|r| r.dim() != self.data.n_features()) {
                return Err(Error::DimMismatch { expected: self.data.n_features(), found: r.dim() });
            }
        }
        Ok(())
    }
}

impl Objective for LogReg {
    fn dim(&self) -> usize {
        self.data.n_features() * self.classes()
    }

    fn num_examples(&self) -> usize {
        self.data.len()
    }

    fn eval(&self, theta: &ParamVector, batch: &Batch) -> Result<f64> {
        check_theta(self.dim(), theta)?;
        batch.check(self.data.len())?;
        self.check_rows(batch)?;
        let mut scores = vec![0.0; self.classes()];
        let mut acc = 0.0;
        for (j, &i) in batch.indices.iter().enumerate() {
            self.scores(theta, self.row(batch, j), &mut scores);
            acc += batch.weight(j) * (Self::log_sum_exp(&scores) - scores[self.data.label(i)]);
        }
        Ok(acc / batch.total_weight() + self.regularizer(theta))
    }

    fn grad(&self, theta: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        check_theta(self.dim(), theta)?;
        batch.check(self.data.len())?;
        self.check_rows(batch)?;
        let k = self.classes();
        let total = batch.total_weight();
        let mut g = if self.l2 == 0.0 { ParamVector::zeros(self.dim()) } else { theta.scale(self.l2) };
        let mut scores = vec![0.0; k];
        let gs = g.as_mut_slice();
        for (j, &i) in batch.indices.iter().enumerate() {
            let row = self.row(batch, j);
            self.scores(theta, row, &mut scores);
            let lse = Self::log_sum_exp(&scores);
            let label = self.data.label(i);
            let w = batch.weight(j) / total;
            // softmax probabilities minus the one-hot target
            for (c, s) in scores.iter_mut().enumerate() {
                *s = w * ((*s - lse).exp() - if c == label { 1.0 } else { 0.0 });
            }
            for &(f, x) in row.entries() {
                for (gc, &r) in gs[f * k..(f + 1) * k].iter_mut().zip(&scores) {
                    *gc += x * r;
                }
            }
        }
        Ok(g)
    }

    fn full_eval(&self, theta: &ParamVector) -> f64 {
        self.eval(theta, &Batch::new((0..self.data.len()).collect())).unwrap_or(f64::NAN)
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn dataset(&self) -> Option<&Dataset> {
        Some(&self.data)
    }
}
