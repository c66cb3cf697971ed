//! Held-out entries for the binary prediction experiment.

use gcp_core::{Data, DenseTensor, FitProblem, KruskalTensor, LossSpec, Weighting};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// A split of the entries of a tensor into a training set and a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Holdout {
    /// Observed entries for fitting, in linear-index order.
    pub train: Vec<Vec<usize>>,
    /// Held-out entries and their true values, in linear-index order.
    pub test: Vec<(Vec<usize>, f64)>,
}

impl Holdout {
    fn from_test_set(x: &DenseTensor, mut test_lin: Vec<usize>) -> Result<Self> {
        test_lin.sort_unstable();
        let shape = x.shape();
        let mut held = vec![false; shape.total()];
        for &l in &test_lin {
            held[l] = true;
        }
        let mut train = Vec::with_capacity(shape.total() - test_lin.len());
        for (l, &h) in held.iter().enumerate() {
            if !h {
                train.push(shape.multi_index(l)?);
            }
        }
        let test = test_lin
            .into_iter()
            .map(|l| Ok((shape.multi_index(l)?, x.values()[l])))
            .collect::<gcp_core::Result<Vec<_>>>()?;
        Ok(Self { train, test })
    }

    /// Fitting problem over the training entries only.
    pub fn train_problem(
        &self,
        x: &DenseTensor,
        loss: LossSpec,
        rank: usize,
    ) -> Result<FitProblem> {
        Ok(FitProblem::with_weighting(
            Data::Dense(x.clone()),
            Weighting::Mask(self.train.clone()),
            loss,
            rank,
        )?)
    }
}

/// Hold out `n_ones` entries equal to 1 and `n_zeros` equal to 0, each
/// chosen uniformly without replacement.
pub fn make_holdout(x: &DenseTensor, n_ones: usize, n_zeros: usize, seed: u64) -> Result<Holdout> {
    let mut ones = Vec::new();
    let mut zeros = Vec::new();
    for (l, &v) in x.values().iter().enumerate() {
        if v == 1.0 {
            ones.push(l);
        } else if v == 0.0 {
            zeros.push(l);
        }
    }
    if ones.len() < n_ones || zeros.len() < n_zeros {
        return Err(Error::Count(format!(
            "asked for {n_ones} ones and {n_zeros} zeros, tensor has {} and {}",
            ones.len(),
            zeros.len()
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut test: Vec<usize> = sample(&mut rng, ones.len(), n_ones)
        .iter()
        .map(|i| ones[i])
        .collect();
    test.extend(
        sample(&mut rng, zeros.len(), n_zeros)
            .iter()
            .map(|i| zeros[i]),
    );
    Holdout::from_test_set(x, test)
}

/// Hold out `round(fraction · total)` entries chosen uniformly.
pub fn make_holdout_random(x: &DenseTensor, fraction: f64, seed: u64) -> Result<Holdout> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Count(format!(
            "holdout fraction {fraction} outside [0, 1]"
        )));
    }
    let total = x.shape().total();
    let n = (fraction * total as f64).round() as usize;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    Holdout::from_test_set(x, sample(&mut rng, total, n).into_vec())
}

/// `Σ_{x=1} ln p + Σ_{x=0} ln(1 − p)` over the test entries, with `p` the
/// truncated probability implied by the model under `loss`.
pub fn heldout_loglik(model: &KruskalTensor, h: &Holdout, loss: &LossSpec) -> Result<f64> {
    let mut ll = 0.0;
    for (idx, x) in &h.test {
        let p = loss.probability(model.entry(idx)?)?;
        ll += if *x == 1.0 {
            p.ln()
        } else if *x == 0.0 {
            (1.0 - p).ln()
        } else {
            return Err(gcp_core::Error::Domain(format!(
                "held-out value {x} at {idx:?} is not binary"
            ))
            .into());
        };
    }
    Ok(ll)
}
