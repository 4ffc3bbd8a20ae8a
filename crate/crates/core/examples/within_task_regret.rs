//! Single-task online learning: regret against the hindsight optimum and
//! the bound it is measured against, for a range of step sizes.

use aruba::domain::Domain;
use aruba::error::Result;
use aruba::geometry::Geometry;
use aruba::loss::LossOracle;
use aruba::param::ParamVector;
use aruba::rng::SeedStream;
use aruba::task::Task;
use aruba::within_task::{run_task, Mode, Scale, WithinTaskConfig};
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<()> {
    let dim = 4;
    let domain = Domain::ball_at_origin(dim, 1.0)?;
    let mut rng = SeedStream::new(7).rng();
    let center = ParamVector::new(vec![0.4, -0.2, 0.1, 0.0])?;
    let losses = (0..50)
        .map(|_| {
            let noise: Vec<f64> = (0..dim).map(|_| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            LossOracle::quadratic(center.add(&ParamVector::new(noise)?), 0.5)
        })
        .collect::<Result<Vec<_>>>()?;
    let task = Task::new(losses, &domain)?;

    println!("{:>8} {:>10} {:>10}", "eta", "regret", "bound");
    for eta in [0.01, 0.03, 0.1, 0.3, 1.0] {
        let config = WithinTaskConfig::new(Geometry::Euclidean, domain.clone(), ParamVector::zeros(dim), Scale::Scalar(eta), Mode::OmdLinearized)?;
        let trace = run_task(&config, &task)?;
        println!("{eta:>8} {:>10.4} {:>10.4}", trace.regret, trace.upper_bound);
    }
    Ok(())
}
