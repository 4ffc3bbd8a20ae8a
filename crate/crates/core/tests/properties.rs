use aruba::domain::Domain;
use aruba::environments::{gen_dynamic, gen_geometry, gen_static, DriftSchedule, EnvKind, EnvSpec, LossKind};
use aruba::geometry::Geometry;
use aruba::loss::LossOracle;
use aruba::meta_init::{InitState, InitStrategy};
use aruba::meta_scale::{riccati_h, ScalarScaleState, ScalarStrategy};
use aruba::param::ParamVector;
use aruba::rng::SeedStream;
use aruba::task::Task;
use aruba::within_task::{omd_iterate, run_task, Mode, Scale, WithinTaskConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_point(rng: &mut aruba::rng::Rng, dim: usize, half_width: f64) -> ParamVector {
    ParamVector::new((0..dim).map(|_| rng.random_range(-half_width..half_width)).collect()).unwrap()
}

fn random_task(seed: u64, dim: usize, m: usize, domain: &Domain, linear: bool) -> Task {
    let mut rng = SeedStream::new(seed).rng();
    let losses = (0..m)
        .map(|_| {
            let a = random_point(&mut rng, dim, 1.0);
            if linear {
                LossOracle::linear(a)
            } else {
                LossOracle::quadratic(a, rng.random_range(0.1..1.0)).unwrap()
            }
        })
        .collect();
    Task::new(losses, domain).unwrap()
}

fn config(domain: &Domain, init: ParamVector, scale: Scale) -> WithinTaskConfig {
    WithinTaskConfig::new(Geometry::Euclidean, domain.clone(), init, scale, Mode::OmdLinearized).unwrap()
}

fn ewoo_trapezoid(state: &ScalarScaleState, eps: f64, points: usize) -> f64 {
    let (lo, hi) = state.interval().unwrap();
    let gamma = state.gamma().unwrap();
    let s0: f64 = state.history().iter().map(|(_, s)| s).sum();
    let s1: f64 = state.history().iter().map(|(b, s)| s * (b + eps * eps)).sum();
    let exponent = |v: f64| gamma * (s1 / v + s0 * v);
    let step = (hi - lo) / points as f64;
    let floor = (0..=points).map(|i| exponent(lo + step * i as f64)).fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=points {
        let v = lo + step * i as f64;
        let w = if i == 0 || i == points { 0.5 } else { 1.0 };
        let p = (floor - exponent(v)).exp();
        num += w * v * p;
        den += w * p;
    }
    num / den
}

fn spec(kind: EnvKind, dim: usize, seed: u64) -> EnvSpec {
    EnvSpec {
        kind,
        dim,
        m: 8,
        tasks: 30,
        family: LossKind::Quadratic,
        domain: Domain::ball_at_origin(dim, 2.0).unwrap(),
        lipschitz: 1.0,
        noise: 0.1,
        center: None,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regret_never_exceeds_its_bound(
        seed in any::<u64>(),
        dim in 1usize..5,
        m in 1usize..20,
        eta in 0.01f64..2.0,
        linear in any::<bool>(),
    ) {
        let domain = Domain::ball_at_origin(dim, 1.5).unwrap();
        let task = random_task(seed, dim, m, &domain, linear);
        let init = random_point(&mut SeedStream::new(seed).named("init").rng(), dim, 0.5);
        let scalar = run_task(&config(&domain, init.clone(), Scale::Scalar(eta)), &task).unwrap();
        prop_assert!(scalar.regret <= scalar.upper_bound + 1e-9);
        prop_assert!(scalar.regret <= scalar.upper_bound_observed + 1e-9);
        let rates = ParamVector::new((0..dim).map(|j| eta * (1.0 + j as f64)).collect()).unwrap();
        let diagonal = run_task(&config(&domain, init, Scale::Diagonal(rates)), &task).unwrap();
        prop_assert!(diagonal.regret <= diagonal.upper_bound + 1e-9);
    }

    #[test]
    fn lazy_mirror_descent_is_projected_dual_average(
        seed in any::<u64>(),
        dim in 1usize..6,
        eta in 0.01f64..1.0,
    ) {
        let mut rng = SeedStream::new(seed).rng();
        let phi = random_point(&mut rng, dim, 0.3);
        let sum = random_point(&mut rng, dim, 5.0);
        let free = Domain::unconstrained(dim).unwrap();
        let theta = omd_iterate(&config(&free, phi.clone(), Scale::Scalar(eta)), &sum).unwrap();
        prop_assert!(theta.distance(&phi.axpy(-eta, &sum)) < 1e-12);

        let ball = Domain::ball_at_origin(dim, 1.0).unwrap();
        let y = phi.axpy(-eta, &sum);
        let expected = if y.norm() <= 1.0 { y.clone() } else { y.scale(1.0 / y.norm()) };
        let theta = omd_iterate(&config(&ball, phi, Scale::Scalar(eta)), &sum).unwrap();
        prop_assert!(theta.distance(&expected) < 1e-12);
    }

    #[test]
    fn mirror_descent_and_ftrl_agree_on_linear_losses(seed in any::<u64>(), dim in 1usize..4, m in 1usize..10) {
        let domain = Domain::ball_at_origin(dim, 1.0).unwrap();
        let task = random_task(seed, dim, m, &domain, true);
        let phi = ParamVector::zeros(dim);
        let omd = run_task(&config(&domain, phi.clone(), Scale::Scalar(0.3)), &task).unwrap();
        let ftrl_config = WithinTaskConfig::new(Geometry::Euclidean, domain, phi, Scale::Scalar(0.3), Mode::FtrlFull).unwrap();
        let ftrl = run_task(&ftrl_config, &task).unwrap();
        for (a, b) in omd.iterates.iter().zip(&ftrl.iterates) {
            prop_assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn scaling_losses_and_rate_together_scales_regret(seed in any::<u64>(), c in 0.1f64..10.0, eta in 0.05f64..1.0) {
        let domain = Domain::ball_at_origin(3, 1.0).unwrap();
        let task = random_task(seed, 3, 12, &domain, false);
        let phi = ParamVector::zeros(3);
        let base = run_task(&config(&domain, phi.clone(), Scale::Scalar(eta)), &task).unwrap();
        let scaled = run_task(&config(&domain, phi, Scale::Scalar(eta / c)), &task.scaled(c).unwrap()).unwrap();
        for (a, b) in base.iterates.iter().zip(&scaled.iterates) {
            prop_assert!(a.distance(b) < 1e-9);
        }
        prop_assert!((scaled.regret - c * base.regret).abs() <= 1e-7 * (1.0 + c * base.regret.abs()));
        prop_assert!((scaled.upper_bound - c * base.upper_bound).abs() <= 1e-9 * c * base.upper_bound);
    }

    #[test]
    fn eps_ftl_minimizes_the_surrogate_sum(seed in any::<u64>(), eps in 0.01f64..0.5, n in 1usize..30) {
        let diameter = 1.0;
        let mut rng = SeedStream::new(seed).rng();
        let mut state = ScalarScaleState::new(ScalarStrategy::EpsFtl { eps, diameter }).unwrap();
        for _ in 0..n {
            state.observe(rng.random::<f64>() * diameter * diameter, rng.random_range(0.5..2.0)).unwrap();
        }
        let objective = |v: f64| state.history().iter().map(|(b, s)| s * ((b + eps * eps) / v + v)).sum::<f64>();
        let v = state.v().unwrap();
        let (lo, hi) = state.interval().unwrap();
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        let best = (0..=20_000).map(|i| objective(lo + (hi - lo) * i as f64 / 20_000.0)).fold(f64::INFINITY, f64::min);
        prop_assert!(objective(v) <= best + 1e-12 * best.abs());
    }

    #[test]
    fn ewoo_mean_matches_quadrature_and_ignores_order(seed in any::<u64>(), eps in 0.05f64..0.5, n in 1usize..25) {
        let strategy = ScalarStrategy::EpsEwoo { eps, diameter: 1.0, lipschitz: 1.0, m: 5 };
        let mut rng = SeedStream::new(seed).rng();
        let observations: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.random::<f64>(), rng.random_range(0.5..2.0))).collect();
        let mut forward = ScalarScaleState::new(strategy).unwrap();
        let mut backward = ScalarScaleState::new(strategy).unwrap();
        for &(b, s) in &observations {
            forward.observe(b, s).unwrap();
        }
        for &(b, s) in observations.iter().rev() {
            backward.observe(b, s).unwrap();
        }
        let v = forward.v().unwrap();
        let (lo, hi) = forward.interval().unwrap();
        prop_assert!(v > lo && v < hi);
        prop_assert!((v - backward.v().unwrap()).abs() <= 1e-9 * v);
        let reference = ewoo_trapezoid(&forward, eps, 200_000);
        prop_assert!((v - reference).abs() <= 1e-6 * reference, "{v} vs {reference}");
    }

    #[test]
    fn ftl_mean_is_the_weighted_average(seed in any::<u64>(), dim in 1usize..5, n in 1usize..20) {
        let mut rng = SeedStream::new(seed).rng();
        let domain = Domain::ball_at_origin(dim, 3.0).unwrap();
        let mut init = InitState::new(InitStrategy::FtlMean, Geometry::Euclidean, domain, None).unwrap();
        let mut weighted = ParamVector::zeros(dim);
        let mut total = 0.0;
        for _ in 0..n {
            let point = random_point(&mut rng, dim, 1.0);
            let sigma = rng.random_range(0.1..3.0);
            weighted.add_scaled_assign(sigma, &point);
            total += sigma;
            init.update(&point, sigma).unwrap();
        }
        prop_assert!(init.phi().distance(&weighted.scale(1.0 / total)) < 1e-12);
    }

    #[test]
    fn riccati_solution_is_spd_and_satisfies_the_equation(seed in any::<u64>(), dim in 1usize..10) {
        let mut rng = SeedStream::new(seed).rng();
        let mut spd = || {
            let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            &a * a.transpose() + DMatrix::identity(dim, dim) * 1e-2
        };
        let (b2, g2) = (spd(), spd());
        let h = riccati_h(&b2, &g2).unwrap();
        prop_assert!((&h - h.transpose()).norm() <= 1e-10 * h.norm());
        prop_assert!(nalgebra::SymmetricEigen::new(h.clone()).eigenvalues.min() > 0.0);
        prop_assert!((&h * &g2 * &h - &b2).norm() <= 1e-8 * b2.norm());
    }

    #[test]
    fn environment_losses_respect_the_declared_lipschitz_bound(seed in any::<u64>(), dim in 1usize..5) {
        let env = spec(EnvKind::Static { deviation: 0.3 }, dim, seed);
        let stream = gen_static(&env).unwrap();
        let mut rng = SeedStream::new(seed).named("probe").rng();
        for task in &stream.tasks {
            for loss in task.losses() {
                for _ in 0..3 {
                    let x = env.domain.sample(&mut rng);
                    prop_assert!(loss.gradient(&x).norm() <= env.lipschitz + 1e-9);
                }
            }
        }
    }

    #[test]
    fn environments_are_deterministic_in_the_seed(seed in any::<u64>()) {
        let walk = spec(EnvKind::Dynamic { schedule: DriftSchedule::RandomWalk { step: 0.05 }, deviation: 0.1 }, 3, seed);
        prop_assert_eq!(gen_dynamic(&walk).unwrap(), gen_dynamic(&walk).unwrap());
        let spread = ParamVector::new(vec![0.3, 0.1, 0.0]).unwrap();
        let geometry = spec(EnvKind::Geometry { spread, rotate: true }, 3, seed);
        prop_assert_eq!(gen_geometry(&geometry).unwrap(), gen_geometry(&geometry).unwrap());
    }

    #[test]
    fn motionless_drift_reproduces_the_static_environment(seed in any::<u64>()) {
        let still = spec(EnvKind::Dynamic { schedule: DriftSchedule::RandomWalk { step: 0.0 }, deviation: 0.2 }, 2, seed);
        let fixed = spec(EnvKind::Static { deviation: 0.2 }, 2, seed);
        let (a, b) = (gen_dynamic(&still).unwrap(), gen_static(&fixed).unwrap());
        prop_assert_eq!(a.path_length, 0.0);
        prop_assert_eq!(a.centers, b.centers);
        prop_assert_eq!(a.tasks, b.tasks);
    }
}
