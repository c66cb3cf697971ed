//! Objective and gradient of generalized CP fitting.
//!
//! For a weight tensor `W` the objective is
//!
//! ```text
//! F(A₁..A_d) = Σᵢ wᵢ f(xᵢ, mᵢ) + Σₖ (ηₖ/2) ‖Aₖ‖²,    M = [[A₁, …, A_d]]
//! ```
//!
//! and its gradient in factor `k` is `Y₍ₖ₎ Zₖ + ηₖ Aₖ`, where
//! `yᵢ = wᵢ ∂f/∂m(xᵢ, mᵢ)` is the elementwise derivative tensor and the
//! product with `Zₖ` is an MTTKRP. `Y` vanishes wherever `W` does, so it is
//! stored sparsely when the data are scarce (only a listed subset of
//! entries observed) and densely otherwise, including for sparse data whose
//! unlisted zeros are observed.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kruskal::KruskalTensor;
use crate::loss::{LossKind, LossSpec};
use crate::tensor::{hadamard, CooTensor, DenseTensor, Matrix, Shape};

/// Data tensor together with what its unlisted entries mean.
#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    /// Every entry stored explicitly.
    Dense(DenseTensor),
    /// Listed entries are the nonzeros; every other entry is an observed zero.
    Sparse(CooTensor),
    /// Listed entries are the only observed ones.
    Scarce(CooTensor),
}

impl Data {
    pub fn shape(&self) -> &Shape {
        match self {
            Data::Dense(t) => t.shape(),
            Data::Sparse(t) | Data::Scarce(t) => t.shape(),
        }
    }

    pub fn storage_name(&self) -> &'static str {
        match self {
            Data::Dense(_) => "dense",
            Data::Sparse(_) => "coo",
            Data::Scarce(_) => "scarce",
        }
    }
}

/// How entries are weighted in the objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// All entries the data declare observed, each with weight `1/|Ω|`.
    Uniform,
    /// Only these multiindices are observed, each with weight `1/|Ω|`.
    Mask(Vec<Vec<usize>>),
    /// Arbitrary nonnegative weights on the listed entries; all others get 0.
    Explicit(Vec<(Vec<usize>, f64)>),
}

/// Observed entries sorted by linear index.
#[derive(Debug, Clone, PartialEq)]
struct Observed {
    indices: Vec<usize>,
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Observed {
    fn len(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// Every entry of the tensor is observed with the same weight.
    Full {
        weight: f64,
    },
    Listed(Observed),
}

/// A GCP fitting problem: data, weights, loss, rank, per-mode L2
/// regularization and per-mode lower bounds on factor entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    data: Data,
    layout: Layout,
    /// Densified sparse data for the generic path; absent for Gaussian
    /// loss, which uses the sparse fast path instead.
    dense_x: Option<DenseTensor>,
    loss: LossSpec,
    rank: usize,
    reg: Vec<f64>,
    lower: Vec<f64>,
}

impl FitProblem {
    /// Uniformly weighted problem over every observed entry of `data`.
    pub fn new(data: Data, loss: LossSpec, rank: usize) -> Result<Self> {
        Self::with_weighting(data, Weighting::Uniform, loss, rank)
    }

    pub fn with_weighting(
        data: Data,
        weighting: Weighting,
        loss: LossSpec,
        rank: usize,
    ) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Shape("rank must be at least 1".into()));
        }
        let shape = data.shape().clone();
        let layout = match (&data, weighting) {
            (Data::Dense(t), Weighting::Uniform) => {
                for &x in t.values() {
                    loss.check_data(x)?;
                }
                Layout::Full {
                    weight: 1.0 / shape.total() as f64,
                }
            }
            (Data::Sparse(t), Weighting::Uniform) => {
                for &x in t.values() {
                    loss.check_data(x)?;
                }
                if t.nnz() < shape.total() {
                    loss.check_data(0.0)?;
                }
                Layout::Full {
                    weight: 1.0 / shape.total() as f64,
                }
            }
            (Data::Scarce(t), Weighting::Uniform) => {
                let w = 1.0 / t.nnz().max(1) as f64;
                let entries = t.iter().map(|(idx, x)| (idx.to_vec(), x, w));
                Layout::Listed(observed(&shape, &loss, entries)?)
            }
            (Data::Scarce(_), Weighting::Mask(_)) => return Err(Error::Contract(
                "scarce data already define the observed set; a mask cannot be combined with it",
            )),
            (_, Weighting::Mask(mask)) => {
                let w = 1.0 / mask.len().max(1) as f64;
                let lookup = ValueLookup::new(&data)?;
                let entries = mask
                    .into_iter()
                    .map(|idx| {
                        let x = lookup.get(&idx)?;
                        Ok((idx, x, w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Layout::Listed(observed(&shape, &loss, entries)?)
            }
            (_, Weighting::Explicit(list)) => {
                let lookup = ValueLookup::new(&data)?;
                let entries = list
                    .into_iter()
                    .map(|(idx, w)| {
                        if !(w >= 0.0 && w.is_finite()) {
                            return Err(Error::Domain(format!(
                                "weight {w} at {idx:?} is not a finite nonnegative number"
                            )));
                        }
                        let x = lookup.get(&idx)?;
                        Ok((idx, x, w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Layout::Listed(observed(&shape, &loss, entries)?)
            }
        };
        if let Layout::Listed(obs) = &layout {
            if obs.len() == 0 {
                return Err(Error::Shape("no observed entries".into()));
            }
        }
        let dense_x = match (&data, &layout) {
            (Data::Sparse(t), Layout::Full { .. }) if loss.kind() != LossKind::Gaussian => {
                Some(t.to_dense()?)
            }
            _ => None,
        };
        let d = shape.order();
        let bound = if loss.is_bounded() {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        Ok(Self {
            data,
            layout,
            dense_x,
            loss,
            rank,
            reg: vec![0.0; d],
            lower: vec![bound; d],
        })
    }

    /// Same `η` on every mode.
    pub fn with_reg(self, eta: f64) -> Result<Self> {
        let d = self.order();
        self.with_reg_per_mode(vec![eta; d])
    }

    pub fn with_reg_per_mode(mut self, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != self.order() {
            return Err(Error::Shape(format!(
                "{} regularization weights for {} modes",
                eta.len(),
                self.order()
            )));
        }
        if eta.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return Err(Error::Domain(
                "regularization weights must be finite and nonnegative".into(),
            ));
        }
        self.reg = eta;
        Ok(self)
    }

    /// Per-mode lower bounds on factor entries, each `0` or `−∞`. Losses
    /// that need `m ≥ 0` require a zero bound on every mode.
    pub fn with_lower_bounds(mut self, lower: Vec<f64>) -> Result<Self> {
        if lower.len() != self.order() {
            return Err(Error::Shape(format!(
                "{} bounds for {} modes",
                lower.len(),
                self.order()
            )));
        }
        if lower.iter().any(|&b| !(b == 0.0 || b == f64::NEG_INFINITY)) {
            return Err(Error::Domain("factor bounds must be 0 or -inf".into()));
        }
        if self.loss.is_bounded() && lower.iter().any(|&b| b != 0.0) {
            return Err(Error::Contract(
                "this loss needs nonnegative factors in every mode",
            ));
        }
        self.lower = lower;
        Ok(self)
    }

    /// Constrain every mode to nonnegative factors.
    pub fn nonnegative(self) -> Result<Self> {
        let d = self.order();
        self.with_lower_bounds(vec![0.0; d])
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    pub fn shape(&self) -> &Shape {
        self.data.shape()
    }

    pub fn order(&self) -> usize {
        self.shape().order()
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn reg(&self) -> &[f64] {
        &self.reg
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    /// `|Ω|`, the number of entries carrying weight.
    pub fn num_observed(&self) -> usize {
        match &self.layout {
            Layout::Full { .. } => self.shape().total(),
            Layout::Listed(obs) => obs.len(),
        }
    }

    /// True when the derivative tensor is stored sparsely.
    pub fn is_scarce(&self) -> bool {
        matches!(self.layout, Layout::Listed(_))
    }

    /// True when [`gaussian_fast_fg`] applies.
    pub fn supports_gaussian_fast_path(&self) -> bool {
        self.loss.kind() == LossKind::Gaussian && matches!(self.layout, Layout::Full { .. })
    }

    fn check_model(&self, m: &KruskalTensor) -> Result<()> {
        if m.shape() != self.shape() {
            return Err(Error::Shape(format!(
                "model shape {:?} does not match data shape {:?}",
                m.shape().dims(),
                self.shape().dims()
            )));
        }
        if m.rank() != self.rank {
            return Err(Error::Shape(format!(
                "model rank {} but problem rank {}",
                m.rank(),
                self.rank
            )));
        }
        for (k, (f, &lb)) in m.factors().iter().zip(&self.lower).enumerate() {
            if let Some(v) = f.as_slice().iter().find(|&&v| !(v >= lb)) {
                return Err(Error::Feasibility(format!(
                    "factor {k} has entry {v} below its bound {lb}"
                )));
            }
        }
        Ok(())
    }

    fn regularize(&self, m: &KruskalTensor, grads: &mut [Matrix]) -> f64 {
        let mut penalty = 0.0;
        for ((g, a), &eta) in grads.iter_mut().zip(m.factors()).zip(&self.reg) {
            if eta == 0.0 {
                continue;
            }
            penalty += 0.5 * eta * a.frobenius_norm_sq();
            for (gv, &av) in g.as_mut_slice().iter_mut().zip(a.as_slice()) {
                *gv += eta * av;
            }
        }
        penalty
    }
}

fn observed<I>(shape: &Shape, loss: &LossSpec, entries: I) -> Result<Observed>
where
    I: IntoIterator<Item = (Vec<usize>, f64, f64)>,
{
    let mut rows: Vec<(usize, Vec<usize>, f64, f64)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, x, w) in entries {
        let lin = shape.linear_index(&idx)?;
        if !seen.insert(lin) {
            return Err(Error::Shape(format!("entry {idx:?} listed twice")));
        }
        loss.check_data(x)?;
        rows.push((lin, idx, x, w));
    }
    rows.sort_unstable_by_key(|r| r.0);
    let mut obs = Observed {
        indices: Vec::with_capacity(rows.len() * shape.order()),
        x: Vec::with_capacity(rows.len()),
        w: Vec::with_capacity(rows.len()),
    };
    for (_, idx, x, w) in rows {
        obs.indices.extend_from_slice(&idx);
        obs.x.push(x);
        obs.w.push(w);
    }
    Ok(obs)
}

/// Value lookup by multiindex for dense or sparse data.
enum ValueLookup<'a> {
    Dense(&'a DenseTensor),
    Sparse(alloc::collections::BTreeMap<usize, f64>, &'a Shape),
}

impl<'a> ValueLookup<'a> {
    fn new(data: &'a Data) -> Result<Self> {
        Ok(match data {
            Data::Dense(t) => ValueLookup::Dense(t),
            Data::Sparse(t) | Data::Scarce(t) => ValueLookup::Sparse(
                t.iter()
                    .map(|(idx, v)| (t.shape().linear_index_unchecked(idx), v))
                    .collect(),
                t.shape(),
            ),
        })
    }

    fn get(&self, idx: &[usize]) -> Result<f64> {
        match self {
            ValueLookup::Dense(t) => t.get(idx),
            ValueLookup::Sparse(map, shape) => {
                let lin = shape.linear_index(idx)?;
                Ok(map.get(&lin).copied().unwrap_or(0.0))
            }
        }
    }
}

/// Elementwise derivative tensor `Y`.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivTensor {
    Dense(DenseTensor),
    Sparse(CooTensor),
}

impl DerivTensor {
    pub fn is_sparse(&self) -> bool {
        matches!(self, DerivTensor::Sparse(_))
    }

    /// Number of stored values.
    pub fn stored_len(&self) -> usize {
        match self {
            DerivTensor::Dense(t) => t.values().len(),
            DerivTensor::Sparse(t) => t.nnz(),
        }
    }

    pub fn shape(&self) -> &Shape {
        match self {
            DerivTensor::Dense(t) => t.shape(),
            DerivTensor::Sparse(t) => t.shape(),
        }
    }
}

/// `Y₍ₖ₎ Zₖ` for any storage of `Y`.
pub fn mttkrp(y: &DerivTensor, m: &KruskalTensor, mode: usize) -> Result<Matrix> {
    match y {
        DerivTensor::Dense(t) => mttkrp_dense(t, m, mode),
        DerivTensor::Sparse(t) => mttkrp_coo(t, m, mode),
    }
}

/// `Y₍ₖ₎ Zₖ` for dense `Y`, at cost `O(r · total)`.
pub fn mttkrp_dense(y: &DenseTensor, m: &KruskalTensor, mode: usize) -> Result<Matrix> {
    check_operand(y.shape(), m, mode)?;
    let shape = y.shape();
    let size = shape.dim(mode);
    let inner = shape.strides()[mode];
    let outer = shape.total() / (inner * size);
    let z = m.zk(mode)?;
    let r = m.rank();
    let mut out = Matrix::zeros(size, r);
    let yv = y.values();
    for j in 0..r {
        let zc = z.col(j);
        let gc = out.col_mut(j);
        for b in 0..outer {
            let zb = &zc[b * inner..(b + 1) * inner];
            for (row, g) in gc.iter_mut().enumerate() {
                let start = inner * (row + size * b);
                let yb = &yv[start..start + inner];
                *g += yb.iter().zip(zb).map(|(a, c)| a * c).sum::<f64>();
            }
        }
    }
    Ok(out)
}

/// `Y₍ₖ₎ Zₖ` touching only the stored entries, at cost `O(r · d · nnz)`.
pub fn mttkrp_coo(y: &CooTensor, m: &KruskalTensor, mode: usize) -> Result<Matrix> {
    check_operand(y.shape(), m, mode)?;
    let r = m.rank();
    let mut out = Matrix::zeros(y.shape().dim(mode), r);
    let factors = m.factors();
    for (idx, v) in y.iter() {
        if v == 0.0 {
            continue;
        }
        for j in 0..r {
            let mut prod = v;
            for (l, (f, &i)) in factors.iter().zip(idx).enumerate() {
                if l != mode {
                    prod *= f[(i, j)];
                }
            }
            out[(idx[mode], j)] += prod;
        }
    }
    Ok(out)
}

fn check_operand(shape: &Shape, m: &KruskalTensor, mode: usize) -> Result<()> {
    shape.check_mode(mode)?;
    if shape != m.shape() {
        return Err(Error::Shape(format!(
            "tensor shape {:?} does not match model shape {:?}",
            shape.dims(),
            m.shape().dims()
        )));
    }
    Ok(())
}

/// Model values at the given multiindices.
pub fn model_entries_at(m: &KruskalTensor, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
    indices.iter().map(|idx| m.entry(idx)).collect()
}

/// Model values at flattened, validated multiindices. Switches to a full
/// reconstruction when more than half of all entries are requested.
fn model_values_listed(m: &KruskalTensor, flat: &[usize]) -> Result<Vec<f64>> {
    let shape = m.shape();
    let d = shape.order();
    let count = flat.len() / d;
    if count > shape.total() / 2 && shape.check_dense_budget().is_ok() {
        let full = m.full()?;
        let fv = full.values();
        Ok(flat
            .chunks_exact(d)
            .map(|idx| fv[shape.linear_index_unchecked(idx)])
            .collect())
    } else {
        Ok(flat
            .chunks_exact(d)
            .map(|idx| m.entry_unchecked(idx))
            .collect())
    }
}

/// Data term of the objective and the derivative tensor `Y`.
///
/// `Y` is sparse with exactly `|Ω|` stored entries for listed (scarce or
/// masked) problems and dense otherwise.
pub fn deriv_tensor(p: &FitProblem, m: &KruskalTensor) -> Result<(f64, DerivTensor)> {
    p.check_model(m)?;
    let loss = &p.loss;
    match &p.layout {
        Layout::Full { weight } => {
            let x = match (&p.data, &p.dense_x) {
                (Data::Dense(t), _) => t.values(),
                (_, Some(t)) => t.values(),
                (Data::Sparse(t), None) => {
                    // Gaussian loss on sparse data: the generic path densifies per call.
                    let dense = t.to_dense()?;
                    return full_layout_deriv(loss, *weight, dense.values(), m);
                }
                (Data::Scarce(_), None) => unreachable!("scarce data always use a listed layout"),
            };
            full_layout_deriv(loss, *weight, x, m)
        }
        Layout::Listed(obs) => {
            let ms = model_values_listed(m, &obs.indices)?;
            let mut f = 0.0;
            let mut y = Vec::with_capacity(obs.len());
            for ((&x, &w), &mv) in obs.x.iter().zip(&obs.w).zip(&ms) {
                f += w * loss.value_unchecked(x, mv);
                y.push(w * loss.deriv_unchecked(x, mv));
            }
            let coo = CooTensor::from_parts_unchecked(m.shape().clone(), obs.indices.clone(), y);
            Ok((f, DerivTensor::Sparse(coo)))
        }
    }
}

fn full_layout_deriv(
    loss: &LossSpec,
    weight: f64,
    x: &[f64],
    m: &KruskalTensor,
) -> Result<(f64, DerivTensor)> {
    let full = m.full()?;
    let mut f = 0.0;
    let mut y = Vec::with_capacity(x.len());
    for (&xv, &mv) in x.iter().zip(full.values()) {
        f += weight * loss.value_unchecked(xv, mv);
        y.push(weight * loss.deriv_unchecked(xv, mv));
    }
    Ok((
        f,
        DerivTensor::Dense(DenseTensor::new(m.shape().clone(), y)?),
    ))
}

/// Objective value and factor gradients.
///
/// When `m` carries weights `λ`, they enter the model and each factor
/// gradient becomes `Y₍ₖ₎ Zₖ diag(λ)`; `λ` itself stays fixed.
pub fn gcp_fg(p: &FitProblem, m: &KruskalTensor) -> Result<(f64, Vec<Matrix>)> {
    let (f, y) = deriv_tensor(p, m)?;
    let (f, grads, _) = assemble(p, m, f, &y, false)?;
    Ok((f, grads))
}

/// Objective, factor gradients and the gradient in the component weights,
/// `∂F/∂λⱼ = Σᵢ yᵢ ∏ₖ Aₖ(iₖ, j)`. The model must carry weights.
pub fn gcp_fg_weighted_lambda(
    p: &FitProblem,
    m: &KruskalTensor,
) -> Result<(f64, Vec<Matrix>, Vec<f64>)> {
    if !m.has_weights() {
        return Err(Error::Contract(
            "the weighted gradient needs a model with component weights",
        ));
    }
    let (f, y) = deriv_tensor(p, m)?;
    let (f, grads, gl) = assemble(p, m, f, &y, true)?;
    Ok((f, grads, gl.unwrap_or_default()))
}

fn assemble(
    p: &FitProblem,
    m: &KruskalTensor,
    f_data: f64,
    y: &DerivTensor,
    want_lambda: bool,
) -> Result<(f64, Vec<Matrix>, Option<Vec<f64>>)> {
    let mut grads = Vec::with_capacity(m.order());
    let mut lambda_grad = None;
    for k in 0..m.order() {
        let g = mttkrp(y, m, k)?;
        if k == 0 && want_lambda {
            lambda_grad = Some(column_dots(m.factor(0), &g));
        }
        grads.push(g);
    }
    if let Some(w) = m.weights() {
        for g in grads.iter_mut() {
            g.scale_columns(w);
        }
    }
    let penalty = p.regularize(m, &mut grads);
    Ok((f_data + penalty, grads, lambda_grad))
}

/// `∂F/∂λ` from an existing derivative tensor: `Zᵀ vec(Y)` with
/// `Z = A_d ⊙ … ⊙ A₁`.
pub fn lambda_gradient(y: &DerivTensor, m: &KruskalTensor) -> Result<Vec<f64>> {
    let g = mttkrp(y, m, 0)?;
    Ok(column_dots(m.factor(0), &g))
}

/// `Σᵢ a(i, j) b(i, j)` for every column `j`.
fn column_dots(a: &Matrix, b: &Matrix) -> Vec<f64> {
    (0..a.cols())
        .map(|j| a.col(j).iter().zip(b.col(j)).map(|(x, y)| x * y).sum())
        .collect()
}

/// Hadamard product of the Gram matrices of every factor except `skip`.
pub fn gram_hadamard(m: &KruskalTensor, skip: Option<usize>) -> Matrix {
    let r = m.rank();
    let mut acc = Matrix::from_fn(r, r, |_, _| 1.0);
    for (k, f) in m.factors().iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        acc = hadamard(&acc, &f.gram()).expect("gram matrices are r x r");
    }
    acc
}

/// Squared-error objective and gradient for fully observed data without
/// forming the model or `Y`:
///
/// ```text
/// Gₖ = (2/|I|) (−X₍ₖ₎ Zₖ + Aₖ Λ Γₖ) Λ + ηₖ Aₖ,   Γₖ = ∗_{ℓ≠k} A_ℓᵀ A_ℓ
/// ```
///
/// where `Λ = diag(λ)` (identity without weights). The `2/|I|` factor
/// carries the derivative of `(x − m)²` and the mean over all entries.
/// Sparse data go through the coordinate MTTKRP.
pub fn gaussian_fast_fg(p: &FitProblem, m: &KruskalTensor) -> Result<(f64, Vec<Matrix>)> {
    if !p.supports_gaussian_fast_path() {
        return Err(Error::Contract(
            "the Gaussian fast path needs gaussian loss and fully observed data",
        ));
    }
    p.check_model(m)?;
    let n = p.shape().total() as f64;
    let lambda = m.effective_weights();
    let (x_norm_sq, xz): (f64, Vec<Matrix>) = match &p.data {
        Data::Dense(t) => (
            t.values().iter().map(|v| v * v).sum(),
            (0..m.order())
                .map(|k| mttkrp_dense(t, m, k))
                .collect::<Result<_>>()?,
        ),
        Data::Sparse(t) => (
            t.values().iter().map(|v| v * v).sum(),
            (0..m.order())
                .map(|k| mttkrp_coo(t, m, k))
                .collect::<Result<_>>()?,
        ),
        Data::Scarce(_) => unreachable!("checked by supports_gaussian_fast_path"),
    };
    // ⟨X, M⟩ = Σⱼ λⱼ Σᵢ A₁(i, j) (X₍₁₎ Z₁)(i, j)
    let inner: f64 = column_dots(m.factor(0), &xz[0])
        .iter()
        .zip(&lambda)
        .map(|(d, l)| d * l)
        .sum();
    let full_gram = gram_hadamard(m, None);
    let r = m.rank();
    let mut m_norm_sq = 0.0;
    for a in 0..r {
        for b in 0..r {
            m_norm_sq += lambda[a] * full_gram[(a, b)] * lambda[b];
        }
    }
    let f_data = (x_norm_sq - 2.0 * inner + m_norm_sq) / n;
    let scale = 2.0 / n;
    let mut grads = Vec::with_capacity(m.order());
    for (k, xzk) in xz.into_iter().enumerate() {
        let gamma = gram_hadamard(m, Some(k));
        let mut a = m.factor(k).clone();
        a.scale_columns(&lambda);
        let mut g = a.matmul(&gamma)?;
        for (gv, &xv) in g.as_mut_slice().iter_mut().zip(xzk.as_slice()) {
            *gv = scale * (*gv - xv);
        }
        g.scale_columns(&lambda);
        grads.push(g);
    }
    let penalty = p.regularize(m, &mut grads);
    Ok((f_data + penalty, grads))
}
