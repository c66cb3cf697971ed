use gcp_core::{Error, LossKind, LossSpec};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn specs() -> Vec<LossSpec> {
    let mut v: Vec<LossSpec> = LossKind::ALL.iter().map(|&k| LossSpec::new(k)).collect();
    v.push(LossSpec::huber(1.0).unwrap());
    v.push(LossSpec::negbinom(3.5).unwrap());
    for b in [-0.5, 0.0, 0.3, 1.0, 1.5, 2.0] {
        v.push(LossSpec::beta_div(b).unwrap());
    }
    v
}

/// Random `(x, m)` in the data domain and feasible set of `spec`.
fn draw(spec: &LossSpec, rng: &mut impl Rng) -> (f64, f64) {
    loop {
        let x = match spec.kind() {
            LossKind::Gaussian | LossKind::Huber => rng.random_range(-3.0..3.0),
            LossKind::BernoulliOdds | LossKind::BernoulliLogit => {
                f64::from(rng.random_range(0..2u8))
            }
            LossKind::Poisson | LossKind::PoissonLog | LossKind::NegBinom => {
                f64::from(rng.random_range(0..8u8))
            }
            LossKind::Gamma => rng.random_range(0.1..4.0),
            LossKind::Rayleigh | LossKind::BetaDiv => rng.random_range(0.0..4.0),
        };
        let m = if spec.is_bounded() {
            rng.random_range(0.2..5.0)
        } else {
            rng.random_range(-3.0..3.0)
        };
        if spec.kind() == LossKind::Huber && ((x - m).abs() - spec.delta()).abs() < 1e-3 {
            continue;
        }
        return (x, m);
    }
}

#[test]
fn derivative_matches_central_difference() {
    let h = 1e-6;
    for spec in specs() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(17);
        for _ in 0..100 {
            let (x, m) = draw(&spec, &mut rng);
            let d = spec.deriv(x, m).unwrap();
            let fd = (spec.value(x, m + h).unwrap() - spec.value(x, m - h).unwrap()) / (2.0 * h);
            let err = (d - fd).abs() / (1.0 + d.abs());
            assert!(err < 1e-6, "{spec}: x={x} m={m} d={d} fd={fd} err={err:e}");
        }
    }
}

#[test]
fn beta_limits_match_exactly() {
    let poisson = LossSpec::new(LossKind::Poisson);
    let gamma = LossSpec::new(LossKind::Gamma);
    let b1 = LossSpec::beta_div(1.0).unwrap();
    let b0 = LossSpec::beta_div(0.0).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
    for _ in 0..100 {
        let x = f64::from(rng.random_range(0..10u8));
        let m = rng.random_range(0.0..6.0);
        assert_eq!(b1.value(x, m).unwrap(), poisson.value(x, m).unwrap());
        assert_eq!(b1.deriv(x, m).unwrap(), poisson.deriv(x, m).unwrap());
        let xg = rng.random_range(0.01..6.0);
        assert_eq!(b0.value(xg, m).unwrap(), gamma.value(xg, m).unwrap());
        assert_eq!(b0.deriv(xg, m).unwrap(), gamma.deriv(xg, m).unwrap());
    }
}

#[test]
fn huber_is_continuous_at_the_corner() {
    let delta = 0.25;
    let s = LossSpec::huber(delta).unwrap();
    for sign in [-1.0, 1.0] {
        let m = 1.0 - sign * delta;
        assert!((s.value(1.0, m).unwrap() - delta * delta).abs() < 1e-15);
        assert_eq!(s.deriv(1.0, m).unwrap(), -2.0 * sign * delta);
        let outside = 1.0 - sign * (delta + 1e-9);
        assert!((s.value(1.0, outside).unwrap() - delta * delta).abs() < 1e-8);
        assert!((s.deriv(1.0, outside).unwrap() + 2.0 * sign * delta).abs() < 1e-15);
    }
}

#[test]
fn minimized_where_model_equals_data() {
    let cases = [
        (LossSpec::gaussian(), 1.7),
        (LossSpec::new(LossKind::Poisson), 3.0),
        (LossSpec::new(LossKind::Gamma), 2.2),
    ];
    for (spec, x) in cases {
        assert!(spec.deriv(x, x).unwrap().abs() < 1e-9, "{spec}");
        assert!(spec.deriv(x, x - 1e-3).unwrap() < 0.0);
        assert!(spec.deriv(x, x + 1e-3).unwrap() > 0.0);
    }
}

#[test]
fn odds_maximum_likelihood_by_grid_search() {
    let spec = LossSpec::new(LossKind::BernoulliOdds);
    let (ones, zeros) = (6.0, 4.0);
    let total = |m: f64| ones * spec.value(1.0, m).unwrap() + zeros * spec.value(0.0, m).unwrap();
    let best = (0..=40_000)
        .map(|i| f64::from(i) * 1e-4)
        .min_by(|a, b| total(*a).total_cmp(&total(*b)))
        .unwrap();
    assert!((best - ones / zeros).abs() <= 1e-4, "{best}");
}

#[test]
fn impossible_observations_stay_finite() {
    for kind in [
        LossKind::BernoulliOdds,
        LossKind::Poisson,
        LossKind::NegBinom,
        LossKind::Gamma,
        LossKind::Rayleigh,
    ] {
        let s = LossSpec::new(kind);
        assert!(s.value(1.0, 0.0).unwrap().is_finite(), "{kind}");
        assert!(s.deriv(1.0, 0.0).unwrap().is_finite(), "{kind}");
    }
}

#[test]
fn domain_and_feasibility_errors() {
    let odds = LossSpec::new(LossKind::BernoulliOdds);
    assert!(matches!(odds.value(0.5, 1.0), Err(Error::Domain(_))));
    assert!(matches!(odds.value(1.0, -0.1), Err(Error::Feasibility(_))));
    let poisson = LossSpec::new(LossKind::Poisson);
    assert!(matches!(poisson.value(-1.0, 1.0), Err(Error::Domain(_))));
    assert!(matches!(poisson.value(1.5, 1.0), Err(Error::Domain(_))));
    assert!(LossSpec::new(LossKind::Gamma).check_data(0.0).is_err());
    assert!(LossSpec::new(LossKind::Rayleigh).check_data(0.0).is_ok());
    assert!(LossSpec::huber(0.0).is_err());
    assert!(LossSpec::negbinom(-1.0).is_err());
    assert!(LossSpec::gaussian().with_epsilon(0.0).is_err());
}

#[test]
fn bounds_and_projection() {
    for spec in specs() {
        let unbounded = matches!(
            spec.kind(),
            LossKind::Gaussian | LossKind::PoissonLog | LossKind::BernoulliLogit | LossKind::Huber
        );
        assert_eq!(spec.lower_bound() == f64::NEG_INFINITY, unbounded, "{spec}");
    }
    assert_eq!(LossSpec::new(LossKind::Poisson).project_feasible(-0.3), 0.0);
    assert_eq!(LossSpec::gaussian().project_feasible(-0.3), -0.3);
    let g = LossSpec::new(LossKind::Gamma);
    assert_eq!(g.project_feasible(0.0), 0.0);
    assert!(g.value(1.0, 0.0).unwrap().is_finite());
}

#[test]
fn probabilities() {
    assert_eq!(
        LossSpec::new(LossKind::BernoulliOdds)
            .probability(1.0)
            .unwrap(),
        0.5
    );
    assert_eq!(
        LossSpec::new(LossKind::BernoulliLogit)
            .probability(0.0)
            .unwrap(),
        0.5
    );
    assert_eq!(LossSpec::gaussian().probability(1.2).unwrap(), 1.0 - 1e-16);
    assert_eq!(LossSpec::gaussian().probability(-4.0).unwrap(), 1e-16);
    assert!(LossSpec::new(LossKind::Poisson).probability(0.5).is_err());
}

#[test]
fn names_round_trip() {
    for k in LossKind::ALL {
        assert_eq!(k.as_str().parse::<LossKind>().unwrap(), k);
    }
    assert!("laplace".parse::<LossKind>().is_err());
}
