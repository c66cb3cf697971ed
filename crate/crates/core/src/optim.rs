//! Bound-constrained limited-memory quasi-Newton minimization.
//!
//! Only lower bounds are supported. Each iteration:
//!
//! 1. freezes the variables sitting on their bound with a gradient that
//!    points out of the feasible set;
//! 2. applies the two-loop L-BFGS inverse-Hessian approximation to the
//!    gradient restricted to the free variables, giving a descent direction
//!    that is zero on the frozen ones;
//! 3. searches along the projected path `P(x + α d)` with backtracking on
//!    sufficient decrease, additionally requiring the curvature condition
//!    when the trial point did not touch a bound. If no acceptable step is
//!    found, the curvature memory is dropped and the search is repeated once
//!    along the projected gradient.
//!
//! Curvature pairs with `sᵀy ≤ 1e-10 ‖s‖‖y‖` are discarded.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// Per-variable lower bounds; upper bounds are always `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn new(lower: Vec<f64>) -> Result<Self> {
        if lower.iter().any(|b| b.is_nan() || *b == f64::INFINITY) {
            return Err(Error::Domain("lower bounds must be finite or -inf".into()));
        }
        Ok(Self { lower })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, &l) in x.iter_mut().zip(&self.lower) {
            if *v < l {
                *v = l;
            }
        }
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).all(|(v, l)| v >= l)
    }

    /// `‖P(x − g) − x‖∞`, zero exactly at a first-order stationary point.
    pub fn projected_grad_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .zip(&self.lower)
            .map(|((&xv, &gv), &l)| ((xv - gv).max(l) - xv).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptOptions {
    /// Number of stored curvature pairs.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when the projected-gradient infinity norm is at most this.
    pub grad_tol: f64,
    /// Stop when `(F_old − F_new) ≤ rel_f_tol · max(|F_old|, |F_new|)`.
    pub rel_f_tol: f64,
    /// Sufficient-decrease constant.
    pub ls_decrease: f64,
    /// Curvature constant.
    pub ls_curvature: f64,
    pub ls_max_trials: usize,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            memory: 5,
            max_iters: 1000,
            grad_tol: 1e-5,
            rel_f_tol: 1e-9,
            ls_decrease: 1e-4,
            ls_curvature: 0.9,
            ls_max_trials: 20,
        }
    }
}

impl OptOptions {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || self.max_iters == 0 || self.ls_max_trials == 0 {
            return Err(Error::Domain(
                "memory, max_iters and ls_max_trials must be positive".into(),
            ));
        }
        if !(self.grad_tol > 0.0) || !(self.rel_f_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if !(0.0 < self.ls_decrease
            && self.ls_decrease < self.ls_curvature
            && self.ls_curvature < 1.0)
        {
            return Err(Error::Domain(
                "line search constants need 0 < decrease < curvature < 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    ConvergedGrad,
    ConvergedF,
    MaxIters,
    LineSearchFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::ConvergedGrad => "converged_grad",
            Status::ConvergedF => "converged_f",
            Status::MaxIters => "max_iters",
            Status::LineSearchFailure => "line_search_failure",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One accepted iterate. Iteration 0 is the starting point with step 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub f: f64,
    pub proj_grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptTrace {
    pub records: Vec<IterRecord>,
    pub status: Status,
    /// Oracle calls, including rejected line-search trials.
    pub evaluations: usize,
}

impl OptTrace {
    pub fn final_f(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.f)
    }

    pub fn final_proj_grad_norm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.proj_grad_norm)
    }

    /// Accepted iterations, not counting the starting point.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

fn all_finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

/// Minimize `F` subject to `x ≥ lower`.
///
/// The oracle writes `∇F(x)` into its second argument and returns `F(x)`.
/// Infeasible starting points are projected first. On line-search
/// exhaustion the best iterate so far is returned with
/// [`Status::LineSearchFailure`].
pub fn minimize<F>(
    mut oracle: F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &OptOptions,
) -> Result<(Vec<f64>, OptTrace)>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    opts.validate()?;
    let n = x0.len();
    if bounds.len() != n {
        return Err(Error::Shape(format!(
            "{} bounds for {n} variables",
            bounds.len()
        )));
    }
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = oracle(&x, &mut g)?;
    let mut evaluations = 1;
    if !all_finite(f, &g) {
        return Err(Error::Numerical(format!(
            "objective or gradient is not finite at the starting point (F = {f})"
        )));
    }
    let mut pg = bounds.projected_grad_norm(&x, &g);
    let mut records = vec![IterRecord {
        iteration: 0,
        f,
        proj_grad_norm: pg,
        step: 0.0,
    }];
    let mut pairs: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut free = vec![true; n];
    let mut d = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    let status = loop {
        if pg <= opts.grad_tol {
            break Status::ConvergedGrad;
        }
        if records.len() > opts.max_iters {
            break Status::MaxIters;
        }

        for ((fr, (&xv, &gv)), &l) in free.iter_mut().zip(x.iter().zip(&g)).zip(bounds.lower()) {
            *fr = !(xv <= l && gv > 0.0);
        }
        let mut restarted = false;
        let (step, f_new) = loop {
            two_loop(&pairs, &g, &free, &mut d, &mut alpha);
            let mut gd = dot(&g, &d);
            if (!(gd < 0.0) || !gd.is_finite()) && !pairs.is_empty() {
                pairs.clear();
                two_loop(&pairs, &g, &free, &mut d, &mut alpha);
                gd = dot(&g, &d);
            }
            if !(gd < 0.0) {
                break (0.0, f);
            }
            let initial_step = if pairs.is_empty() {
                (1.0 / norm(&d)).min(1.0)
            } else {
                1.0
            };
            let search = line_search(
                &mut oracle,
                bounds,
                opts,
                &x,
                f,
                &g,
                &d,
                gd,
                initial_step,
                &mut x_new,
                &mut g_new,
            )?;
            evaluations += search.evaluations;
            match search.accepted {
                Some(acc) => break acc,
                // A poor curvature model can point far past a steep
                // region; retry once along the gradient with no memory.
                None if !pairs.is_empty() && !restarted => {
                    pairs.clear();
                    restarted = true;
                }
                None => break (f64::NAN, f),
            }
        };
        if step == 0.0 {
            break Status::ConvergedGrad;
        }
        if step.is_nan() {
            break Status::LineSearchFailure;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back(Pair {
                s,
                y,
                rho: 1.0 / sy,
            });
        }

        let f_old = f;
        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut g, &mut g_new);
        f = f_new;
        pg = bounds.projected_grad_norm(&x, &g);
        records.push(IterRecord {
            iteration: records.len(),
            f,
            proj_grad_norm: pg,
            step,
        });
        if pg <= opts.grad_tol {
            break Status::ConvergedGrad;
        }
        if f_old - f <= opts.rel_f_tol * f_old.abs().max(f.abs()) {
            break Status::ConvergedF;
        }
    };

    Ok((
        x,
        OptTrace {
            records,
            status,
            evaluations,
        },
    ))
}

/// `d = −P H P g` with `H` the L-BFGS inverse Hessian and `P` the
/// restriction to free variables.
fn two_loop(pairs: &VecDeque<Pair>, g: &[f64], free: &[bool], d: &mut [f64], alpha: &mut [f64]) {
    for ((q, &gv), &fr) in d.iter_mut().zip(g).zip(free) {
        *q = if fr { gv } else { 0.0 };
    }
    for (i, p) in pairs.iter().enumerate().rev() {
        let a = p.rho * dot(&p.s, d);
        alpha[i] = a;
        for (q, &yv) in d.iter_mut().zip(&p.y) {
            *q -= a * yv;
        }
    }
    if let Some(last) = pairs.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for q in d.iter_mut() {
            *q *= gamma;
        }
    }
    for (i, p) in pairs.iter().enumerate() {
        let b = p.rho * dot(&p.y, d);
        let c = alpha[i] - b;
        for (r, &sv) in d.iter_mut().zip(&p.s) {
            *r += c * sv;
        }
    }
    for (r, &fr) in d.iter_mut().zip(free) {
        *r = if fr { -*r } else { 0.0 };
    }
}

struct SearchOutcome {
    accepted: Option<(f64, f64)>,
    evaluations: usize,
}

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    oracle: &mut F,
    bounds: &Bounds,
    opts: &OptOptions,
    x: &[f64],
    f: f64,
    g: &[f64],
    d: &[f64],
    gd: f64,
    initial_step: f64,
    x_new: &mut [f64],
    g_new: &mut [f64],
) -> Result<SearchOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x.len();
    let mut step = initial_step;
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut evaluations = 0;
    let mut finite_seen = false;
    // Best point satisfying sufficient decrease but not curvature.
    let mut fallback: Option<(f64, f64, Vec<f64>, Vec<f64>)> = None;
    let mut trial_g = vec![0.0; n];

    for _ in 0..opts.ls_max_trials {
        let mut clipped = false;
        for i in 0..n {
            let v = x[i] + step * d[i];
            let l = bounds.lower()[i];
            if v < l {
                x_new[i] = l;
                clipped = true;
            } else {
                x_new[i] = v;
            }
        }
        if x_new.iter().zip(x).all(|(a, b)| a == b) {
            break;
        }
        let f_trial = oracle(x_new, &mut trial_g)?;
        evaluations += 1;
        if !all_finite(f_trial, &trial_g) {
            hi = step;
            step = 0.5 * (lo + hi);
            continue;
        }
        finite_seen = true;
        let decrease: f64 = g
            .iter()
            .zip(x_new.iter().zip(x))
            .map(|(gv, (a, b))| gv * (a - b))
            .sum();
        if f_trial > f + opts.ls_decrease * decrease || f_trial > f {
            hi = step;
            step = if lo == 0.0 && f_trial - f > f.abs().max(1e-12) {
                // Far worse than the current point: the quadratic model is
                // meaningless here, so shrink hard.
                0.1 * step
            } else if lo == 0.0 {
                // Safeguarded quadratic interpolation while no acceptable
                // shorter step is known, using the slope along the path
                // actually taken so that clipped steps are modelled too.
                let slope = if clipped { decrease / step } else { gd };
                let denom = 2.0 * (f_trial - f - slope * step);
                let q = if slope < 0.0 && denom > 0.0 {
                    -slope * step * step / denom
                } else {
                    0.5 * step
                };
                q.clamp(0.1 * step, 0.5 * step)
            } else {
                0.5 * (lo + hi)
            };
            continue;
        }
        if !clipped && dot(&trial_g, d) < opts.ls_curvature * gd {
            // Too short: keep it as a fallback and try further out.
            if fallback.as_ref().is_none_or(|fb| f_trial < fb.1) {
                fallback = Some((step, f_trial, x_new.to_vec(), trial_g.clone()));
            }
            lo = step;
            step = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                4.0 * step
            };
            continue;
        }
        g_new.copy_from_slice(&trial_g);
        return Ok(SearchOutcome {
            accepted: Some((step, f_trial)),
            evaluations,
        });
    }
    if let Some((step, f_fb, xf, gf)) = fallback {
        x_new.copy_from_slice(&xf);
        g_new.copy_from_slice(&gf);
        return Ok(SearchOutcome {
            accepted: Some((step, f_fb)),
            evaluations,
        });
    }
    if evaluations > 0 && !finite_seen {
        return Err(Error::Numerical(
            "objective or gradient was not finite at any line-search trial point".into(),
        ));
    }
    Ok(SearchOutcome {
        accepted: None,
        evaluations,
    })
}
