use gcp_core::{
    gaussian_fast_fg, gcp_fg, gcp_fg_weighted_lambda, gram_hadamard, khatri_rao, model_entries_at,
    mttkrp, mttkrp_coo, mttkrp_dense, CooTensor, Data, DenseTensor, DerivTensor, FitProblem,
    KruskalTensor, LossKind, LossSpec, Matrix, Shape, Weighting,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

type Rng64 = Xoshiro256PlusPlus;

fn rng(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

fn shape(d: &[usize]) -> Shape {
    Shape::new(d.to_vec()).unwrap()
}

fn model(s: &Shape, r: usize, lo: f64, hi: f64, rng: &mut Rng64) -> KruskalTensor {
    KruskalTensor::new(
        s.dims()
            .iter()
            .map(|&n| Matrix::from_fn(n, r, |_, _| rng.random_range(lo..hi)))
            .collect(),
    )
    .unwrap()
}

fn draw_x(spec: &LossSpec, rng: &mut Rng64) -> f64 {
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

fn all_specs() -> Vec<LossSpec> {
    LossKind::ALL
        .iter()
        .map(|&k| match k {
            LossKind::Huber => LossSpec::huber(0.5).unwrap(),
            LossKind::NegBinom => LossSpec::negbinom(2.0).unwrap(),
            LossKind::BetaDiv => LossSpec::beta_div(0.5).unwrap(),
            _ => LossSpec::new(k),
        })
        .collect()
}

fn model_for(spec: &LossSpec, s: &Shape, r: usize, rng: &mut Rng64) -> KruskalTensor {
    if spec.is_bounded() {
        model(s, r, 0.5, 1.5, rng)
    } else {
        model(s, r, -1.0, 1.0, rng)
    }
}

/// Dense data; Huber data are redrawn away from the kink of the loss.
fn data_for(spec: &LossSpec, m: &KruskalTensor, rng: &mut Rng64) -> DenseTensor {
    let full = m.full().unwrap();
    let vals = full
        .values()
        .iter()
        .map(|&mv| loop {
            let x = draw_x(spec, rng);
            if spec.kind() != LossKind::Huber || ((x - mv).abs() - spec.delta()).abs() > 1e-2 {
                break x;
            }
        })
        .collect();
    DenseTensor::new(m.shape().clone(), vals).unwrap()
}

/// Largest relative central-difference error over all factor entries,
/// relative to `max(|g|, |fd|, 1e-4)`.
fn fd_error(p: &FitProblem, m: &KruskalTensor) -> f64 {
    let h = 1e-6;
    let (_, grads) = gcp_fg(p, m).unwrap();
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.as_slice().to_vec()).collect();
    let v = m.to_vec();
    let f_at = |v: &[f64]| {
        gcp_fg(
            p,
            &KruskalTensor::from_vec(v, m.shape(), m.rank(), false).unwrap(),
        )
        .unwrap()
        .0
    };
    let mut worst = 0.0f64;
    for i in 0..v.len() {
        let mut up = v.clone();
        up[i] += h;
        let mut dn = v.clone();
        dn[i] -= h;
        let fd = (f_at(&up) - f_at(&dn)) / (2.0 * h);
        let g = analytic[i];
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-4));
    }
    worst
}

fn scarce_from(x: &DenseTensor, keep: usize, rng: &mut Rng64) -> CooTensor {
    let s = x.shape();
    let picks = sample(rng, s.total(), keep);
    CooTensor::new(
        s.clone(),
        picks.iter().map(|lin| {
            let idx = s.multi_index(lin).unwrap();
            let v = x.get(&idx).unwrap();
            (idx, v)
        }),
    )
    .unwrap()
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng(2024);
    for spec in all_specs() {
        for dims in [[5usize, 4, 3].as_slice(), &[4, 3, 2, 2]] {
            let s = shape(dims);
            for rank in 1..=3 {
                let m = model_for(&spec, &s, rank, &mut r);
                let x = data_for(&spec, &m, &mut r);
                let dense = FitProblem::new(Data::Dense(x.clone()), spec, rank).unwrap();
                let err = fd_error(&dense, &m);
                assert!(err < 1e-5, "{spec} {dims:?} r={rank} dense: {err:e}");
                let scarce = scarce_from(&x, s.total() / 3, &mut r);
                let sp = FitProblem::new(Data::Scarce(scarce), spec, rank).unwrap();
                let err = fd_error(&sp, &m);
                assert!(err < 1e-5, "{spec} {dims:?} r={rank} scarce: {err:e}");
            }
        }
    }
}

#[test]
fn regularized_gradient() {
    let mut r = rng(3);
    let s = shape(&[4, 3, 3]);
    let m = model(&s, 2, -1.0, 1.0, &mut r);
    let x = data_for(&LossSpec::gaussian(), &m, &mut r);
    let plain = FitProblem::new(Data::Dense(x.clone()), LossSpec::gaussian(), 2).unwrap();
    let reg = plain
        .clone()
        .with_reg_per_mode(vec![0.0, 0.5, 0.0])
        .unwrap();
    let (f0, g0) = gcp_fg(&plain, &m).unwrap();
    let (f1, g1) = gcp_fg(&reg, &m).unwrap();
    assert!((f1 - f0 - 0.25 * m.factor(1).frobenius_norm_sq()).abs() < 1e-14);
    assert_eq!(g1[0], g0[0]);
    for ((a, b), c) in g1[1]
        .as_slice()
        .iter()
        .zip(g0[1].as_slice())
        .zip(m.factor(1).as_slice())
    {
        assert_eq!(*a, b + 0.5 * c);
    }
    assert!(fd_error(&reg.with_reg(0.3).unwrap(), &m) < 1e-5);
}

#[test]
fn weighted_lambda_gradients() {
    let mut r = rng(77);
    let h = 1e-6;
    for spec in all_specs() {
        let s = shape(&[4, 3, 3]);
        let base = model_for(&spec, &s, 2, &mut r);
        let lambda: Vec<f64> = (0..2).map(|_| r.random_range(0.5..1.5)).collect();
        let m = KruskalTensor::with_weights(base.factors().to_vec(), lambda).unwrap();
        let x = data_for(&spec, &m, &mut r);
        let p = FitProblem::new(Data::Dense(x), spec, 2).unwrap();
        let (_, gf, gl) = gcp_fg_weighted_lambda(&p, &m).unwrap();
        let analytic: Vec<f64> = gf
            .iter()
            .flat_map(|g| g.as_slice().to_vec())
            .chain(gl)
            .collect();
        let v = m.to_vec();
        for i in 0..v.len() {
            let f_at = |d: f64| {
                let mut w = v.clone();
                w[i] += d;
                gcp_fg(&p, &KruskalTensor::from_vec(&w, &s, 2, true).unwrap())
                    .unwrap()
                    .0
            };
            let fd = (f_at(h) - f_at(-h)) / (2.0 * h);
            let g = analytic[i];
            let err = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-4);
            assert!(err < 1e-5, "{spec} param {i}: {g} vs {fd}");
        }

        let ones = KruskalTensor::with_weights(base.factors().to_vec(), vec![1.0, 1.0]).unwrap();
        let (_, g_ones, _) = gcp_fg_weighted_lambda(&p, &ones).unwrap();
        assert_eq!(g_ones, gcp_fg(&p, &base).unwrap().1);
    }
    let p = FitProblem::new(
        Data::Dense(DenseTensor::zeros(shape(&[2, 2])).unwrap()),
        LossSpec::gaussian(),
        1,
    )
    .unwrap();
    let unweighted = KruskalTensor::new(vec![Matrix::zeros(2, 1), Matrix::zeros(2, 1)]).unwrap();
    assert!(gcp_fg_weighted_lambda(&p, &unweighted).is_err());
}

#[test]
fn lambda_gradient_hand_sum() {
    // F = Σ w (x − m)² with x = m − 1/2 everywhere gives y = w everywhere
    // after scaling; with unit factors gλ = Σ y = total · w = 1.
    let s = shape(&[2, 3, 4]);
    let m = KruskalTensor::with_weights(
        s.dims()
            .iter()
            .map(|&n| Matrix::from_fn(n, 1, |_, _| 1.0))
            .collect(),
        vec![1.0],
    )
    .unwrap();
    let x = DenseTensor::new(s.clone(), vec![0.5; 24]).unwrap();
    let p = FitProblem::new(Data::Dense(x), LossSpec::gaussian(), 1).unwrap();
    let (_, _, gl) = gcp_fg_weighted_lambda(&p, &m).unwrap();
    assert!((gl[0] - 1.0).abs() < 1e-15, "{gl:?}");
}

fn brute_mttkrp(y: &DenseTensor, m: &KruskalTensor, k: usize) -> Matrix {
    let d = m.order();
    let order: Vec<usize> = (0..d).rev().filter(|&l| l != k).collect();
    let mats: Vec<&Matrix> = order.iter().map(|&l| m.factor(l)).collect();
    let z = if mats.is_empty() {
        Matrix::from_fn(1, m.rank(), |_, _| 1.0)
    } else {
        khatri_rao(&mats).unwrap()
    };
    y.unfold(k).unwrap().matmul(&z).unwrap()
}

#[test]
fn mttkrp_matches_unfold_times_khatri_rao() {
    let mut r = rng(10);
    for dims in [
        vec![6],
        vec![3, 4],
        vec![2, 3, 2],
        vec![6, 5, 4, 3],
        vec![1, 4, 1, 2],
    ] {
        let s = shape(&dims);
        for rank in [1, 3] {
            let m = model(&s, rank, -1.0, 1.0, &mut r);
            let y = DenseTensor::from_fn(s.clone(), |_| r.random_range(-1.0..1.0)).unwrap();
            for k in 0..dims.len() {
                let want = brute_mttkrp(&y, &m, k);
                assert!(mttkrp_dense(&y, &m, k).unwrap().max_abs_diff(&want) <= 1e-12);
                assert!(mttkrp_coo(&y.to_coo(), &m, k).unwrap().max_abs_diff(&want) <= 1e-12);
            }
        }
    }
}

#[test]
fn mttkrp_single_entry_touches_one_row() {
    let mut r = rng(4);
    let s = shape(&[2, 3, 2]);
    let m = model(&s, 2, -1.0, 1.0, &mut r);
    let y = CooTensor::new(s.clone(), [(vec![0, 1, 0], 3.0)]).unwrap();
    let g = mttkrp_coo(&y, &m, 1).unwrap();
    for i in 0..3 {
        for j in 0..2 {
            let want = if i == 1 {
                3.0 * m.factor(2)[(0, j)] * m.factor(0)[(0, j)]
            } else {
                0.0
            };
            assert_eq!(g[(i, j)], want);
        }
    }
    let dense = mttkrp(&DerivTensor::Dense(y.to_dense().unwrap()), &m, 1).unwrap();
    assert!(dense.max_abs_diff(&g) <= 1e-13);
}

#[test]
fn model_entries_agree_with_full() {
    let mut r = rng(12);
    let s = shape(&[3, 4, 2]);
    let m = model(&s, 2, -1.0, 1.0, &mut r);
    let full = m.full().unwrap();
    let all: Vec<Vec<usize>> = s.indices().collect();
    assert_eq!(model_entries_at(&m, &all).unwrap(), full.values());
    assert!(model_entries_at(&m, &[]).unwrap().is_empty());
    let some: Vec<Vec<usize>> = (0..10)
        .map(|_| s.dims().iter().map(|&n| r.random_range(0..n)).collect())
        .collect();
    for (v, idx) in model_entries_at(&m, &some).unwrap().iter().zip(&some) {
        assert!((v - full.get(idx).unwrap()).abs() <= 1e-14);
    }
    assert!(model_entries_at(&m, &[vec![3, 0, 0]]).is_err());
}

#[test]
fn unobserved_values_do_not_matter() {
    let mut r = rng(99);
    let s = shape(&[5, 4, 3]);
    for spec in all_specs() {
        let m = model_for(&spec, &s, 2, &mut r);
        let x = data_for(&spec, &m, &mut r);
        let scarce = scarce_from(&x, 25, &mut r);
        let mask: Vec<Vec<usize>> = scarce.iter().map(|(i, _)| i.to_vec()).collect();
        let mut scrambled = x.clone();
        for idx in s.indices() {
            if !mask.contains(&idx) {
                scrambled.set(&idx, draw_x(&spec, &mut r)).unwrap();
            }
        }
        let a = gcp_fg(&FitProblem::new(Data::Scarce(scarce), spec, 2).unwrap(), &m).unwrap();
        let b = gcp_fg(
            &FitProblem::with_weighting(
                Data::Dense(scrambled),
                Weighting::Mask(mask.clone()),
                spec,
                2,
            )
            .unwrap(),
            &m,
        )
        .unwrap();
        assert_eq!(a, b, "{spec}");

        let mean: f64 = mask
            .iter()
            .map(|idx| {
                spec.value(x.get(idx).unwrap(), m.entry(idx).unwrap())
                    .unwrap()
            })
            .sum::<f64>()
            / mask.len() as f64;
        assert!((a.0 - mean).abs() <= 1e-12 * mean.abs().max(1.0), "{spec}");
    }
}

#[test]
fn derivative_tensor_storage_follows_scarcity() {
    let mut r = rng(5);
    let s = shape(&[5, 4, 3]);
    let spec = LossSpec::new(LossKind::Poisson);
    let m = model(&s, 2, 0.5, 1.5, &mut r);
    let x = data_for(&spec, &m, &mut r);
    let scarce = scarce_from(&x, 17, &mut r);
    let (_, y) =
        gcp_core::deriv_tensor(&FitProblem::new(Data::Scarce(scarce), spec, 2).unwrap(), &m)
            .unwrap();
    assert!(y.is_sparse());
    assert_eq!(y.stored_len(), 17);

    let (_, y) = gcp_core::deriv_tensor(
        &FitProblem::new(Data::Dense(x.clone()), spec, 2).unwrap(),
        &m,
    )
    .unwrap();
    assert!(!y.is_sparse());
    let sparse = CooTensor::new(
        s.clone(),
        x.to_coo()
            .iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|(i, v)| (i.to_vec(), v)),
    )
    .unwrap();
    let (_, y) =
        gcp_core::deriv_tensor(&FitProblem::new(Data::Sparse(sparse), spec, 2).unwrap(), &m)
            .unwrap();
    assert!(!y.is_sparse());
    assert_eq!(y.stored_len(), s.total());
}

#[test]
fn scaling_all_weights_scales_objective() {
    let mut r = rng(6);
    let s = shape(&[4, 3, 3]);
    for spec in all_specs() {
        let m = model_for(&spec, &s, 2, &mut r);
        let x = data_for(&spec, &m, &mut r);
        let listed: Vec<(Vec<usize>, f64)> = s
            .indices()
            .filter(|_| r.random_bool(0.6))
            .map(|i| (i, 0.125))
            .collect();
        let scaled: Vec<(Vec<usize>, f64)> =
            listed.iter().map(|(i, w)| (i.clone(), 4.0 * w)).collect();
        let p1 = FitProblem::with_weighting(
            Data::Dense(x.clone()),
            Weighting::Explicit(listed),
            spec,
            2,
        )
        .unwrap();
        let p4 = FitProblem::with_weighting(Data::Dense(x), Weighting::Explicit(scaled), spec, 2)
            .unwrap();
        let (f1, g1) = gcp_fg(&p1, &m).unwrap();
        let (f4, g4) = gcp_fg(&p4, &m).unwrap();
        assert_eq!(4.0 * f1, f4, "{spec}");
        for (a, b) in g1.iter().zip(&g4) {
            for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(4.0 * u, *v, "{spec}");
            }
        }
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn fast_path_matches_generic_dense() {
    let mut r = rng(8);
    for _ in 0..10 {
        let dims: Vec<usize> = (0..3).map(|_| r.random_range(2..7)).collect();
        let s = shape(&dims);
        let rank = r.random_range(1..4);
        let truth = model(&s, rank, -1.0, 1.0, &mut r);
        let x = data_for(&LossSpec::gaussian(), &truth, &mut r);
        let p = FitProblem::new(Data::Dense(x), LossSpec::gaussian(), rank)
            .unwrap()
            .with_reg(0.1)
            .unwrap();
        let m = model(&s, rank, -1.0, 1.0, &mut r);
        let (fa, ga) = gcp_fg(&p, &m).unwrap();
        let (fb, gb) = gaussian_fast_fg(&p, &m).unwrap();
        assert!(rel_close(fa, fb, 1e-10), "{fa} {fb}");
        for (a, b) in ga.iter().zip(&gb) {
            assert!(a.max_abs_diff(b) <= 1e-10);
        }
    }
}

#[test]
fn fast_path_matches_generic_sparse() {
    let mut r = rng(9);
    let s = shape(&[20, 20, 20]);
    let picks = sample(&mut r, s.total(), 80);
    let x = CooTensor::new(
        s.clone(),
        picks
            .iter()
            .map(|l| (s.multi_index(l).unwrap(), r.random_range(-2.0..2.0))),
    )
    .unwrap();
    let p = FitProblem::new(Data::Sparse(x.clone()), LossSpec::gaussian(), 3).unwrap();
    let dense =
        FitProblem::new(Data::Dense(x.to_dense().unwrap()), LossSpec::gaussian(), 3).unwrap();
    let m = model(&s, 3, -1.0, 1.0, &mut r);
    let (fa, ga) = gaussian_fast_fg(&p, &m).unwrap();
    let (fb, gb) = gcp_fg(&dense, &m).unwrap();
    assert!(rel_close(fa, fb, 1e-10));
    for (a, b) in ga.iter().zip(&gb) {
        assert!(a.max_abs_diff(b) <= 1e-10);
    }
}

#[test]
fn fast_path_contract() {
    let s = shape(&[3, 3]);
    let x = DenseTensor::new(s.clone(), vec![1.0; 9]).unwrap();
    let m = KruskalTensor::new(vec![Matrix::zeros(3, 1), Matrix::zeros(3, 1)]).unwrap();
    let poisson =
        FitProblem::new(Data::Dense(x.clone()), LossSpec::new(LossKind::Poisson), 1).unwrap();
    assert!(gaussian_fast_fg(&poisson, &m).is_err());
    let masked = FitProblem::with_weighting(
        Data::Dense(x),
        Weighting::Mask(vec![vec![0, 0]]),
        LossSpec::gaussian(),
        1,
    )
    .unwrap();
    assert!(gaussian_fast_fg(&masked, &m).is_err());

    let mut r = rng(1);
    let m2 = model(&s, 2, -1.0, 1.0, &mut r);
    assert_eq!(gram_hadamard(&m2, Some(0)), m2.factor(1).gram());
}

#[test]
fn perfect_fit_is_stationary() {
    let mut r = rng(13);
    let s = shape(&[4, 5, 3]);
    let m = model(&s, 2, -1.0, 1.0, &mut r);
    let p = FitProblem::new(Data::Dense(m.full().unwrap()), LossSpec::gaussian(), 2).unwrap();
    let (f, g) = gcp_fg(&p, &m).unwrap();
    assert_eq!(f, 0.0);
    assert!(g.iter().all(|gk| gk.as_slice().iter().all(|&v| v == 0.0)));
}

#[test]
fn construction_errors() {
    let s = shape(&[2, 2]);
    let bad = DenseTensor::new(s.clone(), vec![0.0, 1.0, -1.0, 2.0]).unwrap();
    assert!(FitProblem::new(
        Data::Dense(bad.clone()),
        LossSpec::new(LossKind::Poisson),
        1
    )
    .is_err());
    assert!(FitProblem::new(Data::Dense(bad.clone()), LossSpec::gaussian(), 0).is_err());
    let p = FitProblem::new(Data::Dense(bad), LossSpec::gaussian(), 1).unwrap();
    assert!(p.clone().with_reg(-1.0).is_err());
    assert!(p.clone().with_lower_bounds(vec![0.0]).is_err());
    let neg = KruskalTensor::new(vec![
        Matrix::from_fn(2, 1, |_, _| -1.0),
        Matrix::from_fn(2, 1, |_, _| 1.0),
    ])
    .unwrap();
    let nn = p.nonnegative().unwrap();
    assert!(matches!(
        gcp_fg(&nn, &neg),
        Err(gcp_core::Error::Feasibility(_))
    ));
    let ones = DenseTensor::new(s, vec![1.0; 4]).unwrap();
    let poisson = FitProblem::new(Data::Dense(ones), LossSpec::new(LossKind::Poisson), 1).unwrap();
    assert!(poisson
        .with_lower_bounds(vec![0.0, f64::NEG_INFINITY])
        .is_err());
}
