//! A task distribution that jumps half-way through: tracking the moving
//! comparator beats following the running mean.

use aruba::domain::Domain;
use aruba::engine::{run_meta_stream, MetaRunConfig, SimStrategy};
use aruba::environments::{gen_dynamic, DriftSchedule, EnvKind, EnvSpec, LossKind};
use aruba::meta_init::InitStrategy;
use aruba::param::ParamVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dim, m, tasks) = (2, 20, 600);
    let points = vec![ParamVector::new(vec![-1.0, 0.0])?, ParamVector::new(vec![1.0, 0.0])?];
    let spec = EnvSpec {
        kind: EnvKind::Dynamic { schedule: DriftSchedule::Phases { points }, deviation: 0.05 },
        dim,
        m,
        tasks,
        family: LossKind::Quadratic,
        domain: Domain::ball_at_origin(dim, 1.5)?,
        lipschitz: 1.0,
        noise: 0.05,
        center: None,
        seed: 3,
    };
    let stream = gen_dynamic(&spec)?;
    println!("path length of the reference sequence: {:.2}", stream.path_length);
    for (label, strategy) in [("ftl_mean", InitStrategy::FtlMean), ("ogd_dynamic", InitStrategy::OgdDynamic { lambda: 0.1 })] {
        let config = MetaRunConfig::new(spec.domain.clone(), tasks, strategy, SimStrategy::EpsEwoo { eps: None });
        let run = run_meta_stream(&config, stream.tasks.clone())?;
        let at = |t: usize| run.rows[t - 1].tar;
        println!("{label:>12}: TAR at T/2 = {:.4}, at T = {:.4}", at(tasks / 2), at(tasks));
    }
    Ok(())
}
