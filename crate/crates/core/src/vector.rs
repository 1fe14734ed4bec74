//! Dense and sparse vectors shared by every optimizer and objective.
//!
//! All binary operations are elementwise and length-checked.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense parameter, gradient or moment vector with a length fixed at construction.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Vector<S> {
    values: Vec<S>,
}

impl<S: Scalar> Vector<S> {
    pub fn new(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![S::zero(); dim] }
    }

    pub fn filled(dim: usize, value: S) -> Self {
        Self { values: vec![value; dim] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<S> {
        self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.values.iter()
    }

    pub fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() == other.len() {
            Ok(())
        } else {
            Err(Error::DimMismatch { expected: self.len(), found: other.len() })
        }
    }

    /// Index of the first NaN/Inf entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|x| !x.is_finite())
    }

    pub fn is_finite(&self) -> bool {
        self.first_non_finite().is_none()
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self { values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.check_len(other)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn max(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a.max(b))
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|x| x * c)
    }

    pub fn sqrt(&self) -> Self {
        self.map(|x| x.sqrt())
    }

    pub fn abs(&self) -> Self {
        self.map(|x| x.abs())
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: S, other: &Self) -> Result<()> {
        self.check_len(other)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<S> {
        self.check_len(other)?;
        Ok(self.values.iter().zip(&other.values).fold(S::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn sum(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, &x| acc + x)
    }

    pub fn norm2(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt()
    }

    pub fn norm_inf(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, &x| acc.max(x.abs()))
    }
}

impl<S: Scalar> From<Vec<S>> for Vector<S> {
    fn from(values: Vec<S>) -> Self {
        Self::new(values)
    }
}

impl<S> Index<usize> for Vector<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.values[i]
    }
}

impl<S> IndexMut<usize> for Vector<S> {
    fn index_mut(&mut self, i: usize) -> &mut S {
        &mut self.values[i]
    }
}

/// Sparse vector of dimension `dim` holding `(index, value)` pairs with strictly increasing
/// indices. Used to transport sparse gradients and dataset rows; optimizer state is dense.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGradient<S> {
    dim: usize,
    entries: Vec<(usize, S)>,
}

impl<S: Scalar> SparseGradient<S> {
    pub fn new(dim: usize, entries: Vec<(usize, S)>) -> Result<Self> {
        let mut previous: Option<usize> = None;
        for &(index, _) in &entries {
            if index >= dim {
                return Err(Error::Index { index, dim });
            }
            if let Some(p) = previous {
                if index <= p {
                    return Err(Error::UnsortedIndices { previous: p, index });
                }
            }
            previous = Some(index);
        }
        Ok(Self { dim, entries })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Nonzero pattern of a dense vector.
    pub fn sparsify(dense: &Vector<S>) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != S::zero())
            .map(|(i, &x)| (i, x))
            .collect();
        Self { dim: dense.len(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, S)] {
        &self.entries
    }

    pub fn densify(&self) -> Vector<S> {
        let mut out = Vector::zeros(self.dim);
        for &(i, x) in &self.entries {
            out[i] = x;
        }
        out
    }

    pub fn map_values(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, x)| (i, f(x))).collect(),
        }
    }

    /// Keeps only the entries for which `keep` returns true.
    pub fn retain(&self, mut keep: impl FnMut(usize, S) -> bool) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().copied().filter(|&(i, x)| keep(i, x)).collect(),
        }
    }
}
