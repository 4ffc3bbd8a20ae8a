use aruba::domain::Domain;
use aruba::engine::{
    aruba_practical, run_meta_stream, MetaRunConfig, MetaUpdate, OgdRunner, PracticalConfig, SimStrategy,
};
use aruba::environments::{empirical_deviation, gen_static, EnvKind, EnvSpec, LossKind};
use aruba::federated::{
    client_update, payload_per_client, run_federated, server_round, Client, FederatedConfig, Rate, ServerState, Variant,
};
use aruba::loss::LossOracle;
use aruba::meta_init::InitStrategy;
use aruba::param::ParamVector;
use aruba::rng::SeedStream;
use aruba::task::Task;

fn pv(values: &[f64]) -> ParamVector {
    ParamVector::new(values.to_vec()).unwrap()
}

fn static_env(dim: usize, tasks: usize, deviation: f64, seed: u64) -> EnvSpec {
    EnvSpec {
        kind: EnvKind::Static { deviation },
        dim,
        m: 20,
        tasks,
        family: LossKind::Quadratic,
        domain: Domain::ball_at_origin(dim, 2.0).unwrap(),
        lipschitz: 1.0,
        noise: 0.1,
        center: None,
        seed,
    }
}

#[test]
fn a_single_task_reports_its_own_regret_and_bound() {
    let env = static_env(3, 1, 0.2, 4);
    let stream = gen_static(&env).unwrap();
    let config = MetaRunConfig::new(env.domain.clone(), 1, InitStrategy::FtlMean, SimStrategy::EpsEwoo { eps: None });
    let run = run_meta_stream(&config, stream.tasks).unwrap();
    let row = &run.rows[0];
    assert_eq!(row.t, 1);
    assert_eq!(row.tar, row.regret);
    assert_eq!(row.rub, row.upper_bound);
}

#[test]
fn repeated_task_pins_the_initialization() {
    let domain = Domain::ball_at_origin(2, 2.0).unwrap();
    let losses = vec![LossOracle::quadratic(pv(&[0.5, -0.3]), 0.5).unwrap(), LossOracle::quadratic(pv(&[0.7, -0.1]), 0.5).unwrap()];
    let task = Task::new(losses, &domain).unwrap();
    let config = MetaRunConfig::new(domain, 10, InitStrategy::FtlMean, SimStrategy::EpsEwoo { eps: None });
    let run = run_meta_stream(&config, vec![task; 10]).unwrap();
    let optimum = pv(&[0.6, -0.2]);
    for phi in &run.phis[1..] {
        assert!(phi.distance(&optimum) < 1e-9);
    }
    let tars: Vec<f64> = run.rows.iter().map(|r| r.tar).collect();
    assert!(tars.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn last_iterate_feedback_tracks_optimal_action_feedback() {
    let env = static_env(4, 300, 0.1, 9);
    let final_tar = |update: MetaUpdate| {
        let mut config =
            MetaRunConfig::new(env.domain.clone(), env.tasks, InitStrategy::FtlMean, SimStrategy::EpsEwoo { eps: None });
        config.update = update;
        run_meta_stream(&config, gen_static(&env).unwrap().tasks).unwrap().rows.last().unwrap().tar
    };
    let optimal = final_tar(MetaUpdate::OptimalAction);
    let last = final_tar(MetaUpdate::LastIterate);
    assert!((last - optimal).abs() <= 0.05 * optimal, "{last} vs {optimal}");
}

#[test]
fn practical_variant_starts_at_eps_over_zeta() {
    let env = static_env(3, 5, 0.2, 2);
    let config = PracticalConfig::new(0.2, 0.5, 1.0);
    let run = aruba_practical(&config, &env.domain, gen_static(&env).unwrap().tasks, &OgdRunner::new(env.domain.clone()))
        .unwrap();
    assert_eq!(run.etas[0], ParamVector::filled(3, 0.4));
    assert_eq!(run.rows.len(), 5);
}

#[test]
fn static_environment_has_the_requested_deviation() {
    let env = static_env(5, 2000, 0.3, 17);
    let stream = gen_static(&env).unwrap();
    let measured = empirical_deviation(&stream.centers).unwrap();
    assert!((measured - 0.3).abs() <= 0.2 * 0.3, "{measured}");
}

#[test]
fn single_full_batch_client_is_a_centralized_gradient_step() {
    let targets = [pv(&[1.0, 0.0]), pv(&[0.0, 2.0]), pv(&[-1.0, 1.0]), pv(&[2.0, -3.0])];
    let losses: Vec<LossOracle> = targets.iter().map(|a| LossOracle::quadratic(a.clone(), 1.0).unwrap()).collect();
    let client = Client { id: 0, optimum: pv(&[0.5, 0.0]), train: losses.clone(), test: vec![] };
    let domain = Domain::unconstrained(2).unwrap();
    let phi = pv(&[0.3, -0.4]);
    let eta = 0.25;
    let mut state = ServerState::new(phi.clone(), Variant::Vanilla { eta }, 0.05, 0.05, 1.0).unwrap();
    let update =
        client_update(&client, &phi, &state.rate(), 1, 100, &domain, &mut SeedStream::new(0).rng()).unwrap();
    server_round(&mut state, &[update]).unwrap();
    let mut gradient = ParamVector::zeros(2);
    for loss in &losses {
        gradient.add_assign(&loss.gradient(&phi));
    }
    let expected = phi.axpy(-eta / losses.len() as f64, &gradient);
    assert!(state.phi.distance(&expected) < 1e-15);
    assert_eq!(state.rate(), Rate::Scalar(eta));
}

#[test]
fn isotropic_and_per_coordinate_coincide_in_one_dimension() {
    let base = FederatedConfig { dim: 1, clients: 20, rounds: 15, clients_per_round: 5, seed: 3, ..Default::default() };
    let iso = run_federated(&FederatedConfig { variant: Variant::Isotropic, ..base.clone() }).unwrap();
    let diag = run_federated(&FederatedConfig { variant: Variant::PerCoordinate, ..base }).unwrap();
    assert_eq!(iso.state.phi, diag.state.phi);
    for (a, b) in iso.rounds.iter().zip(&diag.rounds) {
        assert_eq!(a.eta_mean, b.eta_mean);
    }
    assert_eq!(iso.mean_post(), diag.mean_post());
}

#[test]
fn payload_ledger_counts_every_message() {
    let config = FederatedConfig { dim: 4, clients: 20, rounds: 7, clients_per_round: 3, seed: 1, ..Default::default() };
    for variant in [Variant::Vanilla { eta: 0.5 }, Variant::Isotropic, Variant::PerCoordinate] {
        let run = run_federated(&FederatedConfig { variant, ..config.clone() }).unwrap();
        let (down, up) = payload_per_client(&variant, 4);
        assert_eq!(run.state.total_payload(), (7 * 3 * down, 7 * 3 * up));
    }
}
