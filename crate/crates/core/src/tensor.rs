//! Dense and coordinate tensors, column-major matrices and the index
//! arithmetic tying them together.
//!
//! Indices and modes are 0-based everywhere in this crate. The 1-based
//! linear-index formula `i' = 1 + Σₖ (iₖ − 1)·n'ₖ` with `n'₁ = 1` and
//! `n'ₖ = ∏_{ℓ<k} n_ℓ` becomes `i' = Σₖ iₖ·n'ₖ` after shifting both sides
//! by one. Dense storage follows that order (first mode fastest), so the
//! value slice of a [`DenseTensor`] is its vectorization.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Largest number of entries any dense tensor or full reconstruction may hold.
pub const DENSE_ENTRY_BUDGET: usize = 1 << 28;

/// Mode sizes `n₁..n_d` of a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    total: usize,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::Shape("a tensor needs at least one mode".into()));
        }
        if let Some(k) = dims.iter().position(|&n| n == 0) {
            return Err(Error::Shape(format!("mode {k} has size zero")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or(Error::Capacity {
                requested: usize::MAX,
                budget: DENSE_ENTRY_BUDGET,
            })?;
        Ok(Self { dims, total })
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes `d`.
    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries, `∏ nₖ`.
    #[inline]
    pub fn total(&self) -> usize {
        self.total
    }

    #[inline]
    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    /// Geometric mean `n` of the mode sizes, so that `n^d` is the entry count.
    pub fn geometric_mean(&self) -> f64 {
        let d = self.order() as f64;
        let log_sum: f64 = self.dims.iter().map(|&n| crate::math::ln(n as f64)).sum();
        crate::math::exp(log_sum / d)
    }

    /// Arithmetic mean `n̄` of the mode sizes.
    pub fn arithmetic_mean(&self) -> f64 {
        self.dims.iter().sum::<usize>() as f64 / self.order() as f64
    }

    /// Strides `n'ₖ = ∏_{ℓ<k} n_ℓ`.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = Vec::with_capacity(self.order());
        let mut acc = 1;
        for &n in &self.dims {
            strides.push(acc);
            acc *= n;
        }
        strides
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.order() {
            Ok(())
        } else {
            Err(Error::Mode {
                mode,
                order: self.order(),
            })
        }
    }

    pub fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.order() {
            return Err(Error::Range(format!(
                "index has {} components, tensor has {} modes",
                index.len(),
                self.order()
            )));
        }
        for (k, (&i, &n)) in index.iter().zip(&self.dims).enumerate() {
            if i >= n {
                return Err(Error::Range(format!(
                    "index {i} out of range for mode {k} of size {n}"
                )));
            }
        }
        Ok(())
    }

    /// Linear (vectorization) position of a multiindex.
    pub fn linear_index(&self, index: &[usize]) -> Result<usize> {
        self.check_index(index)?;
        Ok(self.linear_index_unchecked(index))
    }

    #[inline]
    pub(crate) fn linear_index_unchecked(&self, index: &[usize]) -> usize {
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.dims) {
            lin += i * stride;
            stride *= n;
        }
        lin
    }

    /// Inverse of [`Shape::linear_index`].
    pub fn multi_index(&self, linear: usize) -> Result<Vec<usize>> {
        if linear >= self.total {
            return Err(Error::Range(format!(
                "linear index {linear} out of range for {} entries",
                self.total
            )));
        }
        let mut out = vec![0; self.order()];
        self.fill_multi_index(linear, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn fill_multi_index(&self, mut linear: usize, out: &mut [usize]) {
        for (slot, &n) in out.iter_mut().zip(&self.dims) {
            *slot = linear % n;
            linear /= n;
        }
    }

    /// Position `(row, col)` of a multiindex in the mode-`k` unfolding.
    ///
    /// 0-based form of `i'ₖ = 1 + Σ_{ℓ<k} (i_ℓ−1) n'_ℓ + Σ_{ℓ>k} (i_ℓ−1) n'_ℓ / nₖ`.
    pub fn unfold_index(&self, mode: usize, index: &[usize]) -> Result<(usize, usize)> {
        self.check_mode(mode)?;
        self.check_index(index)?;
        let mut col = 0;
        let mut stride = 1;
        for (l, (&i, &n)) in index.iter().zip(&self.dims).enumerate() {
            if l == mode {
                continue;
            }
            col += i * stride;
            stride *= n;
        }
        Ok((index[mode], col))
    }

    /// Refuse shapes whose dense form would exceed [`DENSE_ENTRY_BUDGET`].
    pub fn check_dense_budget(&self) -> Result<()> {
        if self.total > DENSE_ENTRY_BUDGET {
            Err(Error::Capacity {
                requested: self.total,
                budget: DENSE_ENTRY_BUDGET,
            })
        } else {
            Ok(())
        }
    }

    /// Iterate all multiindices in linear order.
    pub fn indices(&self) -> MultiIndexIter<'_> {
        MultiIndexIter {
            shape: self,
            current: vec![0; self.order()],
            remaining: self.total,
        }
    }
}

/// Odometer over all multiindices of a shape, first mode fastest.
pub struct MultiIndexIter<'a> {
    shape: &'a Shape,
    current: Vec<usize>,
    remaining: usize,
}

impl Iterator for MultiIndexIter<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.remaining == 0 {
            return None;
        }
        let out = self.current.clone();
        self.remaining -= 1;
        for (slot, &n) in self.current.iter_mut().zip(self.shape.dims()) {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for MultiIndexIter<'_> {}

/// Dense real matrix stored column-major: entry `(i, j)` lives at `i + j·rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from row slices; convenient for literals.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {ncols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column-major values.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Plain product `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let out_col = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for l in 0..self.cols {
                let b = other.data[l + j * other.rows];
                if b == 0.0 {
                    continue;
                }
                let a_col = &self.data[l * self.rows..(l + 1) * self.rows];
                for (o, &a) in out_col.iter_mut().zip(a_col) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `selfᵀ · self`.
    pub fn gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.cols);
        for a in 0..self.cols {
            for b in a..self.cols {
                let v: f64 = self
                    .col(a)
                    .iter()
                    .zip(self.col(b))
                    .map(|(x, y)| x * y)
                    .sum();
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        out
    }

    /// Scale column `j` by `weights[j]`.
    pub fn scale_columns(&mut self, weights: &[f64]) {
        for (j, &w) in weights.iter().enumerate().take(self.cols) {
            for v in self.col_mut(j) {
                *v *= w;
            }
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

/// Elementwise (Hadamard) product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "hadamard of {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

/// Khatri-Rao (columnwise Kronecker) product `mats[0] ⊙ mats[1] ⊙ …`.
///
/// The row index of the first matrix varies slowest, the last fastest.
pub fn khatri_rao(mats: &[&Matrix]) -> Result<Matrix> {
    let (first, rest) = mats
        .split_first()
        .ok_or(Error::Shape("khatri_rao needs at least one matrix".into()))?;
    let r = first.cols;
    if let Some(bad) = rest.iter().find(|m| m.cols != r) {
        return Err(Error::Shape(format!(
            "khatri_rao column mismatch: {r} vs {}",
            bad.cols
        )));
    }
    let mut acc = (*first).clone();
    for next in rest {
        let rows = acc.rows * next.rows;
        let mut out = Matrix::zeros(rows, r);
        for j in 0..r {
            let a = acc.col(j);
            let b = next.col(j);
            let dst = out.col_mut(j);
            for (ia, &av) in a.iter().enumerate() {
                let base = ia * b.len();
                for (ib, &bv) in b.iter().enumerate() {
                    dst[base + ib] = av * bv;
                }
            }
        }
        acc = out;
    }
    Ok(acc)
}

/// d-way array of reals in linear-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.total() {
            return Err(Error::Shape(format!(
                "{} values for a tensor with {} entries",
                values.len(),
                shape.total()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        shape.check_dense_budget()?;
        let values = vec![0.0; shape.total()];
        Ok(Self { shape, values })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        shape.check_dense_budget()?;
        let values = shape.indices().map(|idx| f(&idx)).collect();
        Ok(Self { shape, values })
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// The vectorization `vec(X)`.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[self.shape.linear_index(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let lin = self.shape.linear_index(index)?;
        self.values[lin] = value;
        Ok(())
    }

    /// Mode-`k` unfolding, an `nₖ × (total/nₖ)` matrix.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let rows = self.shape.dim(mode);
        let cols = self.shape.total() / rows;
        let inner = self.shape.strides()[mode];
        let mut out = Matrix::zeros(rows, cols);
        for (p, &v) in self.values.iter().enumerate() {
            let (row, col) = unfold_position(p, inner, rows);
            out.data[row + col * rows] = v;
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(matrix: &Matrix, shape: Shape, mode: usize) -> Result<Self> {
        shape.check_mode(mode)?;
        let rows = shape.dim(mode);
        if matrix.rows != rows || matrix.cols * rows != shape.total() {
            return Err(Error::Shape(format!(
                "a {}x{} matrix is not a mode-{mode} unfolding of {:?}",
                matrix.rows,
                matrix.cols,
                shape.dims()
            )));
        }
        let inner = shape.strides()[mode];
        let values = (0..shape.total())
            .map(|p| {
                let (row, col) = unfold_position(p, inner, rows);
                matrix.data[row + col * rows]
            })
            .collect();
        Ok(Self { shape, values })
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::math::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    /// Nonzero entries as a coordinate tensor.
    pub fn to_coo(&self) -> CooTensor {
        let mut idx = vec![0; self.shape.order()];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (p, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                self.shape.fill_multi_index(p, &mut idx);
                indices.extend_from_slice(&idx);
                values.push(v);
            }
        }
        CooTensor {
            shape: self.shape.clone(),
            indices,
            values,
        }
    }
}

/// Unfolding position of linear index `p` for a mode with inner stride
/// `inner = n'ₖ` and size `nₖ`.
#[inline]
pub(crate) fn unfold_position(p: usize, inner: usize, size: usize) -> (usize, usize) {
    let row = (p / inner) % size;
    let col = p % inner + (p / (inner * size)) * inner;
    (row, col)
}

/// Coordinate-format tensor: distinct in-range multiindices with values.
///
/// Whether unlisted entries are zeros (sparse) or unobserved (scarce) is
/// decided by the caller; the container is the same.
#[derive(Debug, Clone, PartialEq)]
pub struct CooTensor {
    shape: Shape,
    /// Flattened multiindices, `order()` per entry.
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CooTensor {
    /// Build from `(multiindex, value)` pairs. Duplicates are an error.
    pub fn new<I>(shape: Shape, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut seen = BTreeSet::new();
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (idx, v) in entries {
            let lin = shape.linear_index(&idx)?;
            if !seen.insert(lin) {
                return Err(Error::Shape(format!("duplicate coordinate {idx:?}")));
            }
            indices.extend_from_slice(&idx);
            values.push(v);
        }
        Ok(Self {
            shape,
            indices,
            values,
        })
    }

    /// Caller guarantees the indices are in range and distinct.
    pub(crate) fn from_parts_unchecked(
        shape: Shape,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(indices.len(), values.len() * shape.order());
        Self {
            shape,
            indices,
            values,
        }
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Number of stored entries.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Coordinates of stored entry `e`.
    #[inline]
    pub fn coords(&self, e: usize) -> &[usize] {
        let d = self.shape.order();
        &self.indices[e * d..(e + 1) * d]
    }

    #[inline]
    pub fn value(&self, e: usize) -> f64 {
        self.values[e]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        let d = self.shape.order();
        self.indices
            .chunks_exact(d)
            .zip(self.values.iter().copied())
    }

    /// Densify with zeros at unlisted positions.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let mut out = DenseTensor::zeros(self.shape.clone())?;
        for (idx, v) in self.iter() {
            let lin = self.shape.linear_index_unchecked(idx);
            out.values[lin] = v;
        }
        Ok(out)
    }
}
