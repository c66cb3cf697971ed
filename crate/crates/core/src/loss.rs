//! Elementwise loss functions `f(x, m)` with their derivatives in `m`.
//!
//! Every loss is the negative log-likelihood of a data distribution with
//! its link already applied and constant terms dropped, so the model value
//! `m` is the only runtime quantity; distribution parameters such as `σ`
//! (Gaussian) or the Gamma shape `k` never appear. Losses whose natural
//! constraint is `m > 0` instead take `m ≥ 0` and evaluate `m + ε` inside
//! every logarithm and denominator.

use alloc::format;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_1p, powf};

pub const DEFAULT_EPSILON: f64 = 1e-10;
pub const DEFAULT_HUBER_DELTA: f64 = 0.25;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_FAILURES: f64 = 1.0;

/// Probabilities returned by [`LossSpec::probability`] lie in
/// `[PROBABILITY_FLOOR, 1 − PROBABILITY_FLOOR]`.
pub const PROBABILITY_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossKind {
    Gaussian,
    BernoulliOdds,
    BernoulliLogit,
    Poisson,
    PoissonLog,
    Gamma,
    Rayleigh,
    NegBinom,
    Huber,
    BetaDiv,
}

impl LossKind {
    pub const ALL: [LossKind; 10] = [
        LossKind::Gaussian,
        LossKind::BernoulliOdds,
        LossKind::BernoulliLogit,
        LossKind::Poisson,
        LossKind::PoissonLog,
        LossKind::Gamma,
        LossKind::Rayleigh,
        LossKind::NegBinom,
        LossKind::Huber,
        LossKind::BetaDiv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::BernoulliOdds => "bernoulli_odds",
            Self::BernoulliLogit => "bernoulli_logit",
            Self::Poisson => "poisson",
            Self::PoissonLog => "poisson_log",
            Self::Gamma => "gamma",
            Self::Rayleigh => "rayleigh",
            Self::NegBinom => "negbinom",
            Self::Huber => "huber",
            Self::BetaDiv => "beta_div",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown loss '{s}'")))
    }
}

/// A loss from the catalog together with its numerical parameters.
///
/// `delta` is only read by Huber, `beta` by the β-divergence and
/// `failures` (the negative binomial `r`) by `negbinom`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
    epsilon: f64,
    delta: f64,
    beta: f64,
    failures: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_HUBER_DELTA,
            beta: DEFAULT_BETA,
            failures: DEFAULT_FAILURES,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(LossKind::Gaussian)
    }

    pub fn huber(delta: f64) -> Result<Self> {
        Self::new(LossKind::Huber).with_delta(delta)
    }

    pub fn beta_div(beta: f64) -> Result<Self> {
        Self::new(LossKind::BetaDiv).with_beta(beta)
    }

    pub fn negbinom(failures: f64) -> Result<Self> {
        Self::new(LossKind::NegBinom).with_failures(failures)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!(
                "huber delta must be positive, got {delta}"
            )));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_failures(mut self, failures: f64) -> Result<Self> {
        if !(failures > 0.0 && failures.is_finite()) {
            return Err(Error::Domain(format!(
                "negative binomial failures must be positive, got {failures}"
            )));
        }
        self.failures = failures;
        Ok(self)
    }

    #[inline]
    pub fn kind(&self) -> LossKind {
        self.kind
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn failures(&self) -> f64 {
        self.failures
    }

    pub fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    /// Smallest feasible model value: 0 or `−∞`.
    ///
    /// The β-divergence is bounded at 0 for every β since `m^β` is not real
    /// for negative `m`.
    pub fn lower_bound(&self) -> f64 {
        match self.kind {
            LossKind::Gaussian
            | LossKind::PoissonLog
            | LossKind::BernoulliLogit
            | LossKind::Huber => f64::NEG_INFINITY,
            LossKind::BernoulliOdds
            | LossKind::Poisson
            | LossKind::Gamma
            | LossKind::Rayleigh
            | LossKind::NegBinom
            | LossKind::BetaDiv => 0.0,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lower_bound().is_finite()
    }

    /// Clamp a model value onto the feasible set.
    #[inline]
    pub fn project_feasible(&self, m: f64) -> f64 {
        m.max(self.lower_bound())
    }

    /// Check that `x` lies in the data domain of this loss.
    pub fn check_data(&self, x: f64) -> Result<()> {
        let ok = x.is_finite()
            && match self.kind {
                LossKind::Gaussian | LossKind::Huber => true,
                LossKind::BernoulliOdds | LossKind::BernoulliLogit => x == 0.0 || x == 1.0,
                LossKind::Poisson | LossKind::PoissonLog | LossKind::NegBinom => {
                    x >= 0.0 && libm::trunc(x) == x
                }
                LossKind::Gamma => x > 0.0,
                LossKind::Rayleigh | LossKind::BetaDiv => x >= 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "value {x} is outside the data domain of {}",
                self.kind
            )))
        }
    }

    pub fn check_model(&self, m: f64) -> Result<()> {
        if m.is_finite() && m >= self.lower_bound() {
            Ok(())
        } else {
            Err(Error::Feasibility(format!(
                "model value {m} is below the {} bound {}",
                self.kind,
                self.lower_bound()
            )))
        }
    }

    /// `f(x, m)` with data-domain and feasibility checks.
    pub fn value(&self, x: f64, m: f64) -> Result<f64> {
        self.check_data(x)?;
        self.check_model(m)?;
        Ok(self.value_unchecked(x, m))
    }

    /// `∂f/∂m (x, m)` with data-domain and feasibility checks.
    pub fn deriv(&self, x: f64, m: f64) -> Result<f64> {
        self.check_data(x)?;
        self.check_model(m)?;
        Ok(self.deriv_unchecked(x, m))
    }

    /// `f(x, m)` for the inner loop; inputs are assumed valid.
    #[inline]
    pub fn value_unchecked(&self, x: f64, m: f64) -> f64 {
        let eps = self.epsilon;
        match self.kind {
            LossKind::Gaussian => (x - m) * (x - m),
            LossKind::BernoulliOdds => ln_1p(m) - x * ln(m + eps),
            LossKind::BernoulliLogit => softplus(m) - x * m,
            LossKind::Poisson => poisson_value(x, m, eps),
            LossKind::PoissonLog => exp(m) - x * m,
            LossKind::Gamma => gamma_value(x, m, eps),
            LossKind::Rayleigh => {
                let me = m + eps;
                let ratio = x / me;
                2.0 * ln(me) + PI / 4.0 * ratio * ratio
            }
            LossKind::NegBinom => (self.failures + x) * ln_1p(m) - x * ln(m + eps),
            LossKind::Huber => {
                let r = (x - m).abs();
                if r <= self.delta {
                    r * r
                } else {
                    2.0 * self.delta * r - self.delta * self.delta
                }
            }
            LossKind::BetaDiv => {
                let b = self.beta;
                if b == 1.0 {
                    poisson_value(x, m, eps)
                } else if b == 0.0 {
                    gamma_value(x, m, eps)
                } else {
                    let me = m + eps;
                    powf(me, b) / b - x * powf(me, b - 1.0) / (b - 1.0)
                }
            }
        }
    }

    /// `∂f/∂m (x, m)` for the inner loop; inputs are assumed valid.
    #[inline]
    pub fn deriv_unchecked(&self, x: f64, m: f64) -> f64 {
        let eps = self.epsilon;
        match self.kind {
            LossKind::Gaussian => -2.0 * (x - m),
            LossKind::BernoulliOdds => 1.0 / (1.0 + m) - x / (m + eps),
            LossKind::BernoulliLogit => sigmoid(m) - x,
            LossKind::Poisson => poisson_deriv(x, m, eps),
            LossKind::PoissonLog => exp(m) - x,
            LossKind::Gamma => gamma_deriv(x, m, eps),
            LossKind::Rayleigh => {
                let me = m + eps;
                2.0 / me - PI / 2.0 * x * x / (me * me * me)
            }
            LossKind::NegBinom => (self.failures + x) / (1.0 + m) - x / (m + eps),
            LossKind::Huber => {
                let r = x - m;
                if r.abs() <= self.delta {
                    -2.0 * r
                } else {
                    -2.0 * self.delta * r.signum()
                }
            }
            LossKind::BetaDiv => {
                let b = self.beta;
                if b == 1.0 {
                    poisson_deriv(x, m, eps)
                } else if b == 0.0 {
                    gamma_deriv(x, m, eps)
                } else {
                    let me = m + eps;
                    powf(me, b - 1.0) - x * powf(me, b - 2.0)
                }
            }
        }
    }

    /// Probability of a one implied by model value `m`, truncated to
    /// `[1e-16, 1 − 1e-16]`. Defined for the Gaussian (`p = m`) and the two
    /// Bernoulli links.
    pub fn probability(&self, m: f64) -> Result<f64> {
        let p = match self.kind {
            LossKind::Gaussian => m,
            LossKind::BernoulliOdds => {
                if m < 0.0 {
                    0.0
                } else if m.is_infinite() {
                    1.0
                } else {
                    m / (1.0 + m)
                }
            }
            LossKind::BernoulliLogit => sigmoid(m),
            other => {
                return Err(Error::Domain(format!(
                    "{other} has no probability interpretation for binary data"
                )))
            }
        };
        if p.is_nan() {
            return Err(Error::Numerical(format!(
                "probability for model value {m} is NaN"
            )));
        }
        Ok(p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR))
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Huber => write!(f, "huber(delta={})", self.delta),
            LossKind::BetaDiv => write!(f, "beta_div(beta={})", self.beta),
            LossKind::NegBinom => write!(f, "negbinom(failures={})", self.failures),
            k => f.write_str(k.as_str()),
        }
    }
}

#[inline]
fn poisson_value(x: f64, m: f64, eps: f64) -> f64 {
    m - x * ln(m + eps)
}

#[inline]
fn poisson_deriv(x: f64, m: f64, eps: f64) -> f64 {
    1.0 - x / (m + eps)
}

#[inline]
fn gamma_value(x: f64, m: f64, eps: f64) -> f64 {
    let me = m + eps;
    x / me + ln(me)
}

#[inline]
fn gamma_deriv(x: f64, m: f64, eps: f64) -> f64 {
    let me = m + eps;
    1.0 / me - x / (me * me)
}

/// `log(1 + e^m)` without overflow.
#[inline]
fn softplus(m: f64) -> f64 {
    m.max(0.0) + ln_1p(exp(-m.abs()))
}

/// `e^m / (1 + e^m)` without overflow.
#[inline]
fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + exp(-m))
    } else {
        let e = exp(m);
        e / (1.0 + e)
    }
}
