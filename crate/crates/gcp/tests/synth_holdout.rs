use gcp::holdout::{heldout_loglik, make_holdout, make_holdout_random};
use gcp::synth::{random_truth, sample_from_model, SampleParams};
use gcp::Error;
use gcp_core::{gcp_fg, DenseTensor, KruskalTensor, LossKind, LossSpec, Matrix, Shape};

fn constant_model(dims: &[usize], value: f64) -> KruskalTensor {
    let d = dims.len() as f64;
    let c = value.powf(1.0 / d);
    KruskalTensor::new(
        dims.iter()
            .map(|&n| Matrix::from_fn(n, 1, |_, _| c))
            .collect(),
    )
    .unwrap()
}

fn spec(k: LossKind) -> LossSpec {
    LossSpec::new(k)
}

fn mean(x: &DenseTensor) -> f64 {
    x.values().iter().sum::<f64>() / x.values().len() as f64
}

#[test]
fn poisson_constant_rate_mean() {
    let m = constant_model(&[100, 100], 4.0);
    let x = sample_from_model(&m, &spec(LossKind::Poisson), &SampleParams::default(), 1).unwrap();
    assert!((mean(&x) - 4.0).abs() < 0.1, "mean {}", mean(&x));
    assert!(x.values().iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
}

#[test]
fn odds_one_gives_half_ones() {
    let m = constant_model(&[100, 100], 1.0);
    let x = sample_from_model(
        &m,
        &spec(LossKind::BernoulliOdds),
        &SampleParams::default(),
        2,
    )
    .unwrap();
    assert!((mean(&x) - 0.5).abs() < 0.02, "fraction {}", mean(&x));
    assert!(x.values().iter().all(|v| *v == 0.0 || *v == 1.0));
}

#[test]
fn gaussian_noiseless_is_the_model() {
    let s = Shape::new(vec![4, 5, 3]).unwrap();
    let m = random_truth(&s, 2, 0.0, 1.0, 3).unwrap();
    let p = SampleParams {
        sigma: 0.0,
        ..SampleParams::default()
    };
    let x = sample_from_model(&m, &spec(LossKind::Gaussian), &p, 4).unwrap();
    assert_eq!(x, m.full().unwrap());
}

#[test]
fn means_follow_the_model() {
    let s = Shape::new(vec![30, 30, 30]).unwrap();
    let m = random_truth(&s, 2, 0.0, 1.0, 5).unwrap();
    let full = mean(&m.full().unwrap());
    for (k, tol) in [
        (LossKind::Poisson, 0.02),
        (LossKind::Gamma, 0.02),
        (LossKind::Rayleigh, 0.02),
    ] {
        let x = sample_from_model(&m, &spec(k), &SampleParams::default(), 6).unwrap();
        assert!(
            ((mean(&x) - full) / full).abs() < tol,
            "{k}: {} vs {full}",
            mean(&x)
        );
    }
    let r = 3.0;
    let nb = spec(LossKind::NegBinom).with_failures(r).unwrap();
    let x = sample_from_model(&m, &nb, &SampleParams::default(), 7).unwrap();
    assert!(
        ((mean(&x) - r * full) / (r * full)).abs() < 0.03,
        "negbinom {}",
        mean(&x)
    );
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let s = Shape::new(vec![6, 5, 4]).unwrap();
    let m = random_truth(&s, 2, 0.0, 1.0, 8).unwrap();
    assert_eq!(m, random_truth(&s, 2, 0.0, 1.0, 8).unwrap());
    for k in [
        LossKind::Gaussian,
        LossKind::Poisson,
        LossKind::Gamma,
        LossKind::BernoulliLogit,
        LossKind::NegBinom,
    ] {
        let p = SampleParams::default();
        let a = sample_from_model(&m, &spec(k), &p, 9).unwrap();
        assert_eq!(a, sample_from_model(&m, &spec(k), &p, 9).unwrap());
        assert_ne!(a, sample_from_model(&m, &spec(k), &p, 10).unwrap());
    }
}

#[test]
fn infeasible_parameters_are_domain_errors() {
    let neg = KruskalTensor::new(vec![
        Matrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap(),
        Matrix::from_rows(&[vec![1.0]]).unwrap(),
    ])
    .unwrap();
    let p = SampleParams::default();
    for k in [
        LossKind::Poisson,
        LossKind::BernoulliOdds,
        LossKind::Gamma,
        LossKind::Rayleigh,
        LossKind::NegBinom,
    ] {
        let e = sample_from_model(&neg, &spec(k), &p, 1).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(
            matches!(e, Error::Core(gcp_core::Error::Domain(_))),
            "{k}: {e}"
        );
    }
    for k in [LossKind::Huber, LossKind::BetaDiv] {
        assert!(sample_from_model(&neg, &spec(k), &p, 1).is_err());
    }
    assert!(sample_from_model(&neg, &spec(LossKind::BernoulliLogit), &p, 1).is_ok());
    let bad = SampleParams { sigma: -1.0, ..p };
    assert!(sample_from_model(&neg, &spec(LossKind::Gaussian), &bad, 1).is_err());
    let s = Shape::new(vec![2, 2]).unwrap();
    assert!(random_truth(&s, 0, 0.0, 1.0, 1).is_err());
    assert!(random_truth(&s, 1, 1.0, 1.0, 1).is_err());
}

fn binary(dims: Vec<usize>, seed: u64) -> DenseTensor {
    let s = Shape::new(dims).unwrap();
    let m = constant_model(s.dims(), 1.0);
    sample_from_model(
        &m,
        &spec(LossKind::BernoulliOdds),
        &SampleParams::default(),
        seed,
    )
    .unwrap()
}

#[test]
fn holdout_is_stratified_disjoint_and_deterministic() {
    let x = binary(vec![10, 10, 10], 3);
    let h = make_holdout(&x, 50, 50, 11).unwrap();
    assert_eq!(h.test.len(), 100);
    assert_eq!(h.test.iter().filter(|(_, v)| *v == 1.0).count(), 50);
    assert_eq!(h.train.len(), 900);
    for (idx, v) in &h.test {
        assert_eq!(x.get(idx).unwrap(), *v);
        assert!(!h.train.contains(idx));
    }
    assert_eq!(h, make_holdout(&x, 50, 50, 11).unwrap());
    assert_ne!(h, make_holdout(&x, 50, 50, 12).unwrap());
}

#[test]
fn holdout_counts_and_fractions() {
    let zeros = DenseTensor::new(Shape::new(vec![5, 5]).unwrap(), vec![0.0; 25]).unwrap();
    assert!(matches!(
        make_holdout(&zeros, 1, 1, 1),
        Err(Error::Count(_))
    ));
    assert!(make_holdout(&zeros, 0, 25, 1).is_ok());
    let x = binary(vec![8, 8], 4);
    let h = make_holdout_random(&x, 0.0, 1).unwrap();
    assert!(h.test.is_empty());
    assert_eq!(h.train.len(), 64);
    assert_eq!(make_holdout_random(&x, 0.25, 1).unwrap().test.len(), 16);
    assert!(make_holdout_random(&x, 1.5, 1).is_err());
}

#[test]
fn loglik_closed_forms() {
    let x = binary(vec![10, 10, 10], 5);
    let h = make_holdout(&x, 50, 50, 6).unwrap();
    let s = x.shape().clone();
    let half = constant_model(s.dims(), 1.0);
    let ll = heldout_loglik(&half, &h, &spec(LossKind::BernoulliOdds)).unwrap();
    assert!((ll - 100.0 * 0.5f64.ln()).abs() < 1e-9, "{ll}");
    assert!((ll + 69.3147).abs() < 1e-4);
    let zero = constant_model(s.dims(), 0.0);
    let ll = heldout_loglik(&zero, &h, &spec(LossKind::BernoulliLogit)).unwrap();
    assert!((ll - 100.0 * 0.5f64.ln()).abs() < 1e-9);

    // Gaussian predictions above 1 are truncated; the result stays finite.
    let big = constant_model(s.dims(), 3.0);
    let ll = heldout_loglik(&big, &h, &spec(LossKind::Gaussian)).unwrap();
    assert!(ll.is_finite() && ll < 0.0);
    let p_max: f64 = 1.0 - 1e-16;
    let expected = 50.0 * p_max.ln() + 50.0 * (1.0 - p_max).ln();
    assert!((ll - expected).abs() < 1e-9, "{ll} vs {expected}");

    assert!(heldout_loglik(&half, &h, &spec(LossKind::Poisson)).is_err());
}

#[test]
fn loglik_of_a_perfect_model_is_nearly_zero() {
    let x = binary(vec![6, 6], 7);
    let h = make_holdout(&x, 5, 5, 8).unwrap();
    // The data matrix itself, written as x · I.
    let a = Matrix::from_fn(6, 6, |i, j| x.get(&[i, j]).unwrap());
    let b = Matrix::from_fn(6, 6, |i, j| f64::from(u8::from(i == j)));
    let m = KruskalTensor::new(vec![a, b]).unwrap();
    let ll = heldout_loglik(&m, &h, &spec(LossKind::Gaussian)).unwrap();
    assert!(ll <= 0.0 && ll > -1e-12, "{ll}");
}

#[test]
fn training_mask_hides_test_entries() {
    let x = binary(vec![6, 5, 4], 9);
    let h = make_holdout(&x, 10, 10, 10).unwrap();
    let loss = spec(LossKind::BernoulliOdds);
    let s = x.shape().clone();
    let m = random_truth(&s, 2, 0.1, 1.0, 11).unwrap();
    let train = h.train_problem(&x, loss, 2).unwrap();
    let (f_train, _) = gcp_fg(&train, &m).unwrap();

    // Changing held-out values leaves the training objective unchanged.
    let mut flipped = x.values().to_vec();
    for (idx, v) in &h.test {
        flipped[s.linear_index(idx).unwrap()] = 1.0 - v;
    }
    let y = DenseTensor::new(s.clone(), flipped).unwrap();
    let (f_flip, _) = gcp_fg(&h.train_problem(&y, loss, 2).unwrap(), &m).unwrap();
    assert_eq!(f_train, f_flip);

    // The fully observed objective differs.
    let full = gcp_core::FitProblem::new(gcp_core::Data::Dense(x.clone()), loss, 2).unwrap();
    assert_ne!(gcp_fg(&full, &m).unwrap().0, f_train);
}
