//! Finite-difference verification of the analytic gradient.
//!
//! For a random model and random data in the domain of the loss, every
//! parameter is perturbed by `±h` and the central difference of `F` is
//! compared with the analytic gradient entry. The error for one entry is
//!
//! ```text
//! |g − fd| / max(|g|, |fd|, 1e-3 · ‖g‖∞)
//! ```
//!
//! so entries that are tiny relative to the rest of the gradient are judged
//! on an absolute scale instead of blowing up the ratio.
//!
//! Bounded losses get factor entries in `[0.5, 1.5)` so that `±h` stays
//! feasible; unbounded ones get `[-1, 1)`. For Huber, data within `0.01` of
//! the kink `|x − m| = Δ` are redrawn.

use gcp_core::{
    gcp_fg, gcp_fg_weighted_lambda, CooTensor, Data, DenseTensor, FitProblem, KruskalTensor,
    LossKind, LossSpec, Matrix, Shape,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub loss: LossSpec,
    pub dims: Vec<usize>,
    pub rank: usize,
    pub seed: u64,
    /// Observe only a random third of the entries.
    pub scarce: bool,
    /// Give the model explicit weights and check their gradient too.
    pub weighted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub case: Case,
    /// Largest relative error among the entries of each factor.
    pub per_mode: Vec<f64>,
    /// Largest relative error over the weights, for weighted cases.
    pub lambda: Option<f64>,
}

impl CaseResult {
    pub fn max_error(&self) -> f64 {
        self.per_mode
            .iter()
            .copied()
            .chain(self.lambda)
            .fold(0.0, f64::max)
    }
}

/// Every loss in the catalog with its default parameters.
pub fn catalog() -> Vec<LossSpec> {
    LossKind::ALL.iter().map(|&k| LossSpec::new(k)).collect()
}

fn draw_x(spec: &LossSpec, rng: &mut Xoshiro256PlusPlus) -> f64 {
    match spec.kind() {
        LossKind::Gaussian | LossKind::Huber => rng.random_range(-2.0..2.0),
        LossKind::BernoulliOdds | LossKind::BernoulliLogit => f64::from(rng.random_range(0..2u8)),
        LossKind::Poisson | LossKind::PoissonLog | LossKind::NegBinom => {
            f64::from(rng.random_range(0..6u8))
        }
        LossKind::Gamma => rng.random_range(0.1..3.0),
        LossKind::Rayleigh | LossKind::BetaDiv => rng.random_range(0.0..3.0),
    }
}

fn random_problem(
    case: &Case,
    rng: &mut Xoshiro256PlusPlus,
) -> Result<(FitProblem, KruskalTensor)> {
    let spec = &case.loss;
    let shape = Shape::new(case.dims.clone())?;
    let (lo, hi) = if spec.is_bounded() {
        (0.5, 1.5)
    } else {
        (-1.0, 1.0)
    };
    let factors: Vec<Matrix> = shape
        .dims()
        .iter()
        .map(|&n| Matrix::from_fn(n, case.rank, |_, _| rng.random_range(lo..hi)))
        .collect();
    let model = if case.weighted {
        let w = (0..case.rank).map(|_| rng.random_range(0.5..1.5)).collect();
        KruskalTensor::with_weights(factors, w)?
    } else {
        KruskalTensor::new(factors)?
    };
    let full = model.full()?;
    let values = full
        .values()
        .iter()
        .map(|&m| loop {
            let x = draw_x(spec, rng);
            if spec.kind() != LossKind::Huber || ((x - m).abs() - spec.delta()).abs() > 1e-2 {
                break x;
            }
        })
        .collect();
    let x = DenseTensor::new(shape.clone(), values)?;
    let data = if case.scarce {
        let keep = (shape.total() / 3).max(1);
        let picks = sample(rng, shape.total(), keep);
        let entries = picks
            .iter()
            .map(|l| {
                let idx = shape.multi_index(l)?;
                let v = x.values()[l];
                Ok((idx, v))
            })
            .collect::<gcp_core::Result<Vec<_>>>()?;
        Data::Scarce(CooTensor::new(shape, entries)?)
    } else {
        Data::Dense(x)
    };
    Ok((FitProblem::new(data, *spec, case.rank)?, model))
}

fn analytic(p: &FitProblem, m: &KruskalTensor) -> Result<Vec<f64>> {
    let g = if m.has_weights() {
        let (_, gf, gl) = gcp_fg_weighted_lambda(p, m)?;
        gf.iter()
            .flat_map(|g| g.as_slice().to_vec())
            .chain(gl)
            .collect()
    } else {
        let (_, gf) = gcp_fg(p, m)?;
        gf.iter().flat_map(|g| g.as_slice().to_vec()).collect()
    };
    Ok(g)
}

/// Run one case. `flip_sign` negates the analytic gradient to confirm that
/// the harness notices a wrong derivative.
pub fn run_case(case: &Case, step: f64, flip_sign: bool) -> Result<CaseResult> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(case.seed);
    let (p, m) = random_problem(case, &mut rng)?;
    let mut g = analytic(&p, &m)?;
    if flip_sign {
        for v in &mut g {
            *v = -*v;
        }
    }
    let v = m.to_vec();
    let f_at = |v: &[f64]| -> Result<f64> {
        let mk = KruskalTensor::from_vec(v, m.shape(), m.rank(), case.weighted)?;
        Ok(gcp_fg(&p, &mk)?.0)
    };
    let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let floor = (1e-3 * scale).max(1e-300);
    let mut errs = Vec::with_capacity(v.len());
    let mut work = v.clone();
    for i in 0..v.len() {
        work[i] = v[i] + step;
        let up = f_at(&work)?;
        work[i] = v[i] - step;
        let dn = f_at(&work)?;
        work[i] = v[i];
        let fd = (up - dn) / (2.0 * step);
        errs.push((g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(floor));
    }
    let mut per_mode = Vec::with_capacity(case.dims.len());
    let mut off = 0;
    for &n in &case.dims {
        let len = n * case.rank;
        per_mode.push(errs[off..off + len].iter().copied().fold(0.0, f64::max));
        off += len;
    }
    let lambda = case
        .weighted
        .then(|| errs[off..].iter().copied().fold(0.0, f64::max));
    Ok(CaseResult {
        case: case.clone(),
        per_mode,
        lambda,
    })
}
