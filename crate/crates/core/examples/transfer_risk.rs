//! Averaging the meta-learner's states gives an initialization and step
//! size for unseen tasks; their risk falls as more training tasks are seen.

use aruba::domain::Domain;
use aruba::engine::{run_meta_stream, transfer_risk_estimate, MetaRunConfig, MetaScale, RiskOptions, SimStrategy};
use aruba::environments::{gen_distributional, EnvKind, EnvSpec, LossKind};
use aruba::meta_init::InitStrategy;
use aruba::param::ParamVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dim, m) = (5, 25);
    let spec = EnvSpec {
        kind: EnvKind::Distributional { dispersion: 0.08 },
        dim,
        m,
        tasks: 1000,
        family: LossKind::Quadratic,
        domain: Domain::ball_at_origin(dim, 3.0)?,
        lipschitz: 1.0,
        noise: 0.25,
        center: Some(ParamVector::new(vec![1.5, 0.0, 0.0, 0.0, 0.0])?),
        seed: 1,
    };
    let env = gen_distributional(&spec)?;
    let config = MetaRunConfig::new(spec.domain.clone(), spec.tasks, InitStrategy::FtlMean, SimStrategy::EpsEwoo { eps: None });
    let run = run_meta_stream(&config, env.train_stream()?)?;
    let options = RiskOptions::new(200, m, 20);
    for horizon in [10, 100, 1000] {
        let phi = ParamVector::mean_of(&run.phis[..horizon])?;
        let scale = MetaScale::average(&run.scales[..horizon])?;
        let risk = transfer_risk_estimate(&phi, &scale, &env, &options)?;
        println!("T = {horizon:>4}: held-out risk {:.5} ± {:.5}, excess {:.5}", risk.mean, risk.std_error, risk.population_excess.unwrap_or(f64::NAN));
    }
    let oracle = transfer_risk_estimate(env.expected_optimum(), &MetaScale::V(env.v_q()?), &env, &options)?;
    println!("oracle initialization: excess {:.5}", oracle.population_excess.unwrap_or(f64::NAN));
    Ok(())
}
