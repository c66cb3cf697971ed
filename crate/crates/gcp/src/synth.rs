//! Synthetic data drawn from a Kruskal model under the distribution behind
//! each loss.
//!
//! Each entry is drawn independently with its parameter recovered from the
//! model value `m` through the inverse link of the loss:
//!
//! | loss              | draw                                                   |
//! |-------------------|--------------------------------------------------------|
//! | `gaussian`        | `N(m, σ²)`                                             |
//! | `bernoulli_odds`  | `Bernoulli(m / (1 + m))`                               |
//! | `bernoulli_logit` | `Bernoulli(e^m / (1 + e^m))`                           |
//! | `poisson`         | `Poisson(m)`                                           |
//! | `poisson_log`     | `Poisson(e^m)`                                         |
//! | `gamma`           | `Gamma(k, m / k)` (shape, scale), mean `m`             |
//! | `rayleigh`        | `Rayleigh(σ = m / √(π/2))`, mean `m`                   |
//! | `negbinom`        | successes before `r` failures, odds `m`, mean `r m`    |
//!
//! Huber and β-divergence losses have no generating distribution.
//!
//! The generator is xoshiro256++ seeded through `seed_from_u64`, and entries
//! are drawn in linear-index order, so output depends only on the model and
//! the seed.

use gcp_core::{DenseTensor, KruskalTensor, LossKind, LossSpec, Matrix, Shape};
use rand::{Rng, SeedableRng};
use rand_distr::{Bernoulli, Distribution, Gamma, Normal, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleParams {
    /// Gaussian noise standard deviation; 0 gives the model itself.
    pub sigma: f64,
    /// Gamma shape `k`.
    pub gamma_shape: f64,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            gamma_shape: 1.0,
        }
    }
}

fn domain(msg: impl Into<String>) -> crate::Error {
    gcp_core::Error::Domain(msg.into()).into()
}

pub fn sample_from_model(
    m: &KruskalTensor,
    loss: &LossSpec,
    params: &SampleParams,
    seed: u64,
) -> Result<DenseTensor> {
    let full = m.full()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let kind = loss.kind();
    if matches!(kind, LossKind::Huber | LossKind::BetaDiv) {
        return Err(domain(format!(
            "{kind} loss has no generating distribution to sample from"
        )));
    }
    if kind == LossKind::Gaussian && !(params.sigma >= 0.0 && params.sigma.is_finite()) {
        return Err(domain("sigma must be finite and nonnegative"));
    }
    if kind == LossKind::Gamma && !(params.gamma_shape > 0.0 && params.gamma_shape.is_finite()) {
        return Err(domain("gamma shape must be positive"));
    }
    let mut out = Vec::with_capacity(full.values().len());
    for &mv in full.values() {
        out.push(draw(kind, loss, params, mv, &mut rng)?);
    }
    Ok(DenseTensor::new(full.shape().clone(), out)?)
}

fn draw(
    kind: LossKind,
    loss: &LossSpec,
    params: &SampleParams,
    m: f64,
    rng: &mut Xoshiro256PlusPlus,
) -> Result<f64> {
    let need_nonneg = |what: &str| {
        if m >= 0.0 && m.is_finite() {
            Ok(())
        } else {
            Err(domain(format!(
                "{what} needs a finite nonnegative model value, got {m}"
            )))
        }
    };
    let x = match kind {
        LossKind::Gaussian => {
            if params.sigma == 0.0 {
                m
            } else {
                Normal::new(m, params.sigma)
                    .map_err(|e| domain(e.to_string()))?
                    .sample(rng)
            }
        }
        LossKind::BernoulliOdds => {
            need_nonneg("bernoulli_odds")?;
            bernoulli(m / (1.0 + m), rng)?
        }
        LossKind::BernoulliLogit => {
            let p = if m >= 0.0 {
                1.0 / (1.0 + (-m).exp())
            } else {
                m.exp() / (1.0 + m.exp())
            };
            bernoulli(p, rng)?
        }
        LossKind::Poisson => {
            need_nonneg("poisson")?;
            poisson(m, rng)?
        }
        LossKind::PoissonLog => poisson(m.exp(), rng)?,
        LossKind::Gamma => {
            if !(m > 0.0 && m.is_finite()) {
                return Err(domain(format!(
                    "gamma needs a positive model value, got {m}"
                )));
            }
            let k = params.gamma_shape;
            Gamma::new(k, m / k)
                .map_err(|e| domain(e.to_string()))?
                .sample(rng)
        }
        LossKind::Rayleigh => {
            need_nonneg("rayleigh")?;
            let sigma = m / (std::f64::consts::PI / 2.0).sqrt();
            let u: f64 = rng.random();
            sigma * (-2.0 * (1.0 - u).ln()).sqrt()
        }
        LossKind::NegBinom => {
            need_nonneg("negbinom")?;
            if m == 0.0 {
                0.0
            } else {
                let rate = Gamma::new(loss.failures(), m)
                    .map_err(|e| domain(e.to_string()))?
                    .sample(rng);
                poisson(rate, rng)?
            }
        }
        LossKind::Huber | LossKind::BetaDiv => unreachable!("rejected before sampling"),
    };
    Ok(x)
}

fn bernoulli(p: f64, rng: &mut Xoshiro256PlusPlus) -> Result<f64> {
    let b = Bernoulli::new(p).map_err(|e| domain(e.to_string()))?;
    Ok(f64::from(u8::from(b.sample(rng))))
}

fn poisson(rate: f64, rng: &mut Xoshiro256PlusPlus) -> Result<f64> {
    if rate == 0.0 {
        return Ok(0.0);
    }
    if !rate.is_finite() {
        return Err(domain(format!("poisson rate {rate} is not finite")));
    }
    Ok(Poisson::new(rate)
        .map_err(|e| domain(e.to_string()))?
        .sample(rng))
}

/// Ground-truth model with factor entries uniform on `[lo, hi)`, drawn in
/// the same order as [`KruskalTensor::to_vec`].
pub fn random_truth(
    shape: &Shape,
    rank: usize,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<KruskalTensor> {
    if rank == 0 {
        return Err(gcp_core::Error::Shape("rank must be at least 1".into()).into());
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(domain(format!("empty range [{lo}, {hi})")));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let factors = shape
        .dims()
        .iter()
        .map(|&n| {
            let v = (0..n * rank).map(|_| rng.random_range(lo..hi)).collect();
            Matrix::from_col_major(n, rank, v)
        })
        .collect::<gcp_core::Result<Vec<_>>>()?;
    Ok(KruskalTensor::new(factors)?)
}
