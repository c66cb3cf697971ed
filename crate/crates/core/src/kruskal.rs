//! Kruskal (CP-structured) model tensors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::tensor::{khatri_rao, DenseTensor, Matrix, Shape};

/// A sum of `r` rank-one components given by factor matrices `A₁..A_d`
/// (`Aₖ` is `nₖ × r`) and optional component weights `λ`.
///
/// Entry `i` of the model is `Σⱼ λⱼ ∏ₖ Aₖ(iₖ, j)`, with `λ ≡ 1` when no
/// weights are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct KruskalTensor {
    factors: Vec<Matrix>,
    weights: Option<Vec<f64>>,
    shape: Shape,
}

impl KruskalTensor {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        Self::build(factors, None)
    }

    /// Weights must be finite and nonnegative; a zero weight marks a
    /// collapsed component.
    pub fn with_weights(factors: Vec<Matrix>, weights: Vec<f64>) -> Result<Self> {
        Self::build(factors, Some(weights))
    }

    fn build(factors: Vec<Matrix>, weights: Option<Vec<f64>>) -> Result<Self> {
        let first = factors.first().ok_or(Error::Shape(
            "a Kruskal tensor needs at least one factor".into(),
        ))?;
        let r = first.cols();
        if r == 0 {
            return Err(Error::Shape("rank must be at least 1".into()));
        }
        if let Some((k, f)) = factors.iter().enumerate().find(|(_, f)| f.cols() != r) {
            return Err(Error::Shape(format!(
                "factor {k} has {} columns, expected {r}",
                f.cols()
            )));
        }
        if let Some(w) = &weights {
            if w.len() != r {
                return Err(Error::Shape(format!("{} weights for rank {r}", w.len())));
            }
            if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Domain(
                    "component weights must be finite and nonnegative".into(),
                ));
            }
        }
        let shape = Shape::new(factors.iter().map(Matrix::rows).collect::<Vec<_>>())?;
        Ok(Self {
            factors,
            weights,
            shape,
        })
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.factors[0].cols()
    }

    #[inline]
    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    #[inline]
    pub fn factor(&self, mode: usize) -> &Matrix {
        &self.factors[mode]
    }

    #[inline]
    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    #[inline]
    pub fn has_weights(&self) -> bool {
        self.weights.is_some()
    }

    /// Component weights with absent weights read as ones.
    pub fn effective_weights(&self) -> Vec<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| vec![1.0; self.rank()])
    }

    pub fn into_parts(self) -> (Vec<Matrix>, Option<Vec<f64>>) {
        (self.factors, self.weights)
    }

    /// Components whose weight is exactly zero.
    pub fn zero_components(&self) -> Vec<usize> {
        match &self.weights {
            Some(w) => w
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 0.0)
                .map(|(j, _)| j)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Model value at one multiindex.
    pub fn entry(&self, index: &[usize]) -> Result<f64> {
        self.shape.check_index(index)?;
        Ok(self.entry_unchecked(index))
    }

    /// Summation order is fixed (components ascending, modes ascending) so
    /// that [`KruskalTensor::full`] reproduces it bit for bit.
    #[inline]
    pub(crate) fn entry_unchecked(&self, index: &[usize]) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.rank() {
            let mut prod = self.weights.as_ref().map_or(1.0, |w| w[j]);
            for (f, &i) in self.factors.iter().zip(index) {
                prod *= f[(i, j)];
            }
            sum += prod;
        }
        sum
    }

    /// Dense reconstruction of the model.
    pub fn full(&self) -> Result<DenseTensor> {
        self.shape.check_dense_budget()?;
        let total = self.shape.total();
        let mut sum = vec![0.0; total];
        let mut term = Vec::with_capacity(total);
        let mut next = Vec::with_capacity(total);
        for j in 0..self.rank() {
            let lambda = self.weights.as_ref().map_or(1.0, |w| w[j]);
            term.clear();
            term.push(lambda);
            // Build ((λ·a₁)·a₂)·… with the first mode fastest, matching entry().
            for f in &self.factors {
                next.clear();
                for &a in f.col(j) {
                    next.extend(term.iter().map(|&t| t * a));
                }
                core::mem::swap(&mut term, &mut next);
            }
            for (s, &t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
        }
        DenseTensor::new(self.shape.clone(), sum)
    }

    /// `Z_k = A_d ⊙ … ⊙ A_{k+1} ⊙ A_{k−1} ⊙ … ⊙ A₁`.
    pub fn zk(&self, mode: usize) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let mats: Vec<&Matrix> = self
            .factors
            .iter()
            .enumerate()
            .rev()
            .filter(|&(k, _)| k != mode)
            .map(|(_, f)| f)
            .collect();
        if mats.is_empty() {
            // Order-1 model: the unfolding is nₖ × 1 and Z is a single row of ones.
            return Ok(Matrix::from_fn(1, self.rank(), |_, _| 1.0));
        }
        khatri_rao(&mats)
    }

    /// Mode-`k` unfolding computed from the factors: `Aₖ diag(λ) Zₖᵀ`.
    pub fn model_unfold(&self, mode: usize) -> Result<Matrix> {
        let z = self.zk(mode)?;
        let mut a = self.factors[mode].clone();
        if let Some(w) = &self.weights {
            a.scale_columns(w);
        }
        a.matmul(&z.transpose())
    }

    /// Column-normalize every factor, absorbing the norms into `λ`, and
    /// sort components by descending weight.
    ///
    /// A component with a zero column in any factor gets `λⱼ = 0`; its zero
    /// columns stay zero. Ties in `λ` are broken by comparing the first
    /// factor's columns lexicographically.
    pub fn normalize(&self) -> KruskalTensor {
        let r = self.rank();
        let mut factors = self.factors.clone();
        let mut lambda = self.effective_weights();
        for (j, lj) in lambda.iter_mut().enumerate() {
            for f in factors.iter_mut() {
                let norm = crate::math::sqrt(f.col(j).iter().map(|v| v * v).sum());
                if norm > 0.0 {
                    for v in f.col_mut(j) {
                        *v /= norm;
                    }
                    *lj *= norm;
                } else {
                    *lj = 0.0;
                }
            }
        }
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| {
            lambda[b]
                .partial_cmp(&lambda[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| lex_cmp(factors[0].col(a), factors[0].col(b)))
        });
        let factors = factors
            .iter()
            .map(|f| Matrix::from_fn(f.rows(), r, |i, j| f[(i, order[j])]))
            .collect();
        let weights = order.iter().map(|&j| lambda[j]).collect();
        KruskalTensor {
            factors,
            weights: Some(weights),
            shape: self.shape.clone(),
        }
    }

    /// Number of scalar parameters `r·Σₖ nₖ` (plus `r` with weights).
    pub fn num_params(&self) -> usize {
        let base = self.rank() * self.shape.dims().iter().sum::<usize>();
        base + if self.has_weights() { self.rank() } else { 0 }
    }

    /// Stack `vec(A₁); …; vec(A_d)` (each column-major), then `λ` if present.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for f in &self.factors {
            out.extend_from_slice(f.as_slice());
        }
        if let Some(w) = &self.weights {
            out.extend_from_slice(w);
        }
        out
    }

    /// Inverse of [`KruskalTensor::to_vec`].
    pub fn from_vec(v: &[f64], shape: &Shape, rank: usize, has_weights: bool) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Shape("rank must be at least 1".into()));
        }
        let expected =
            rank * shape.dims().iter().sum::<usize>() + if has_weights { rank } else { 0 };
        if v.len() != expected {
            return Err(Error::Shape(format!(
                "parameter vector has length {}, expected {expected}",
                v.len()
            )));
        }
        let mut offset = 0;
        let mut factors = Vec::with_capacity(shape.order());
        for &n in shape.dims() {
            let len = n * rank;
            factors.push(Matrix::from_col_major(
                n,
                rank,
                v[offset..offset + len].to_vec(),
            )?);
            offset += len;
        }
        let weights = has_weights.then(|| v[offset..].to_vec());
        Self::build(factors, weights)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}
