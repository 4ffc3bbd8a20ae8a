//! Meta-learning the initialization and step size: relative to a baseline
//! tuned for the whole domain, the gain grows as the domain gets large
//! compared with the spread of the tasks.

use aruba::domain::Domain;
use aruba::engine::{run_meta_stream, MetaRunConfig, SimStrategy};
use aruba::environments::{gen_static, EnvKind, EnvSpec, LossKind};
use aruba::geometry::Geometry;
use aruba::meta_init::InitStrategy;
use aruba::param::ParamVector;
use aruba::within_task::{run_task, Mode, Scale, WithinTaskConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dim, m, tasks, deviation) = (5, 50, 1000, 0.1);
    println!("{:>10} {:>12} {:>12} {:>8}", "diameter", "TAR meta", "TAR fixed", "ratio");
    for diameter in [1.0, 2.0, 4.0] {
        let spec = EnvSpec {
            kind: EnvKind::Static { deviation },
            dim,
            m,
            tasks,
            family: LossKind::Quadratic,
            domain: Domain::ball_at_origin(dim, diameter / 2.0)?,
            lipschitz: 1.0,
            noise: 0.1,
            center: None,
            seed: 1,
        };
        let stream = gen_static(&spec)?;
        let learned = MetaRunConfig::new(spec.domain.clone(), tasks, InitStrategy::FtlMean, SimStrategy::EpsEwoo { eps: None });
        let meta = run_meta_stream(&learned, stream.tasks.clone())?;
        // Every task starts at the center with the step tuned for the diameter.
        let eta = diameter / (2.0 * m as f64).sqrt();
        let single = WithinTaskConfig::new(Geometry::Euclidean, spec.domain.clone(), ParamVector::zeros(dim), Scale::Scalar(eta), Mode::OmdLinearized)?;
        let mut baseline = 0.0;
        for task in &stream.tasks {
            baseline += run_task(&single, task)?.regret / tasks as f64;
        }
        let tar = meta.rows.last().expect("tasks").tar;
        println!("{diameter:>10} {tar:>12.4} {baseline:>12.4} {:>8.3}", tar / baseline);
    }
    Ok(())
}
