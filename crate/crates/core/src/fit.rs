//! Fitting a Kruskal model by bound-constrained quasi-Newton.
//!
//! The optimization variables are the factor matrices stacked column-major
//! (see [`KruskalTensor::to_vec`]); component weights are fixed at one during
//! the solve and extracted by normalization afterwards.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::kernel::{gaussian_fast_fg, gcp_fg, Data, FitProblem};
use crate::kruskal::KruskalTensor;
use crate::loss::LossSpec;
use crate::optim::{minimize, Bounds, OptOptions, OptTrace};
use crate::tensor::{Matrix, Shape};

/// Starting point of a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Use this model; weights, if any, are absorbed into the first factor.
    Model(KruskalTensor),
    /// Draw a model with [`default_init`].
    Seed(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Normalized model: unit-norm columns, weights in descending order.
    pub model: KruskalTensor,
    pub trace: OptTrace,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        self.trace.final_f()
    }
}

/// Random rank-`rank` model for `shape`.
///
/// Factor entries are drawn in [`KruskalTensor::to_vec`] order from a
/// xoshiro256++ stream seeded with `seed`: uniform on `[0, 1)` when the loss
/// needs a nonnegative model, `0.1 · N(0, 1)` otherwise.
pub fn default_init(
    shape: &Shape,
    rank: usize,
    loss: &LossSpec,
    seed: u64,
) -> Result<KruskalTensor> {
    if rank == 0 {
        return Err(Error::Shape("rank must be at least 1".into()));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let bounded = loss.is_bounded();
    let factors = shape
        .dims()
        .iter()
        .map(|&n| {
            let v: Vec<f64> = (0..n * rank)
                .map(|_| {
                    if bounded {
                        rng.random::<f64>()
                    } else {
                        0.1 * rng.sample::<f64, _>(StandardNormal)
                    }
                })
                .collect();
            Matrix::from_col_major(n, rank, v)
        })
        .collect::<Result<Vec<_>>>()?;
    KruskalTensor::new(factors)
}

/// Fit `p` from `init`.
pub fn fit_gcp(p: &FitProblem, init: Init, opts: &OptOptions) -> Result<FitResult> {
    let start = match init {
        Init::Seed(seed) => default_init(p.shape(), p.rank(), p.loss(), seed)?,
        Init::Model(m) => absorb_weights(m)?,
    };
    if start.shape() != p.shape() || start.rank() != p.rank() {
        return Err(Error::Shape(format!(
            "initial model is {:?} rank {}, problem is {:?} rank {}",
            start.shape().dims(),
            start.rank(),
            p.shape().dims(),
            p.rank()
        )));
    }
    let shape = p.shape().clone();
    let rank = p.rank();
    let lower: Vec<f64> = shape
        .dims()
        .iter()
        .zip(p.lower_bounds())
        .flat_map(|(&n, &lb)| core::iter::repeat_n(lb, n * rank))
        .collect();
    let bounds = Bounds::new(lower)?;
    let fast = p.supports_gaussian_fast_path() && matches!(p.data(), Data::Sparse(_));

    let oracle = |v: &[f64], grad: &mut [f64]| -> Result<f64> {
        let m = KruskalTensor::from_vec(v, &shape, rank, false)?;
        let (f, gs) = if fast {
            gaussian_fast_fg(p, &m)?
        } else {
            gcp_fg(p, &m)?
        };
        let mut off = 0;
        for g in &gs {
            let s = g.as_slice();
            grad[off..off + s.len()].copy_from_slice(s);
            off += s.len();
        }
        Ok(f)
    };
    let (x, trace) = minimize(oracle, &start.to_vec(), &bounds, opts)?;
    let model = KruskalTensor::from_vec(&x, &shape, rank, false)?.normalize();
    Ok(FitResult { model, trace })
}

/// Fit once per seed; returns every run and the index of the one with the
/// lowest final objective (earliest wins ties).
pub fn fit_multistart(
    p: &FitProblem,
    seeds: &[u64],
    opts: &OptOptions,
) -> Result<(Vec<FitResult>, usize)> {
    if seeds.is_empty() {
        return Err(Error::Domain("at least one seed is required".into()));
    }
    let runs = seeds
        .iter()
        .map(|&s| fit_gcp(p, Init::Seed(s), opts))
        .collect::<Result<Vec<_>>>()?;
    let best = best_run(&runs);
    Ok((runs, best))
}

/// Index of the run with the lowest final objective; earliest wins ties.
pub fn best_run(runs: &[FitResult]) -> usize {
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.objective() < runs[best].objective() {
            best = i;
        }
    }
    best
}

fn absorb_weights(m: KruskalTensor) -> Result<KruskalTensor> {
    if !m.has_weights() {
        return Ok(m);
    }
    let w = m.effective_weights();
    let (mut factors, _) = m.into_parts();
    factors[0].scale_columns(&w);
    KruskalTensor::new(factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;
    use crate::tensor::DenseTensor;

    #[test]
    fn default_init_is_deterministic_and_feasible() {
        let s = Shape::new([3, 4, 2].to_vec()).unwrap();
        let loss = LossSpec::new(LossKind::Poisson);
        let a = default_init(&s, 2, &loss, 7).unwrap();
        let b = default_init(&s, 2, &loss, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.to_vec().iter().all(|&v| (0.0..1.0).contains(&v)));
        assert_ne!(a, default_init(&s, 2, &loss, 8).unwrap());
        assert!(default_init(&s, 0, &loss, 7).is_err());
    }

    #[test]
    fn recovers_rank_one() {
        let s = Shape::new([3, 4, 2].to_vec()).unwrap();
        let truth = KruskalTensor::new(
            s.dims()
                .iter()
                .map(|&n| Matrix::from_fn(n, 1, |i, _| 1.0 + i as f64))
                .collect(),
        )
        .unwrap();
        let x: DenseTensor = truth.full().unwrap();
        let p = FitProblem::new(Data::Dense(x), LossSpec::gaussian(), 1).unwrap();
        let opts = OptOptions {
            grad_tol: 1e-10,
            rel_f_tol: 1e-15,
            ..OptOptions::default()
        };
        let r = fit_gcp(&p, Init::Seed(1), &opts).unwrap();
        assert!(r.objective() < 1e-12, "{}", r.objective());
    }
}
