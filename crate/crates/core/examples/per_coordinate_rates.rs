//! Learning a separate step size per coordinate from gradients alone: the
//! coordinate along which tasks differ gets a much larger rate.

use aruba::domain::Domain;
use aruba::engine::{aruba_practical, OgdRunner, PracticalConfig};
use aruba::environments::{gen_geometry, EnvKind, EnvSpec, LossKind};
use aruba::param::ParamVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim = 6;
    let mut spread = vec![1e-3; dim];
    spread[0] = 1.0;
    let domain = Domain::cube(dim, 5.0)?;
    let spec = EnvSpec {
        kind: EnvKind::Geometry { spread: ParamVector::new(spread)?, rotate: false },
        dim,
        m: 20,
        tasks: 300,
        family: LossKind::Quadratic,
        lipschitz: domain.diameter_l2(),
        center: Some(domain.center()),
        domain,
        noise: 0.1,
        seed: 5,
    };
    let tasks = gen_geometry(&spec)?.tasks;
    let run = aruba_practical(&PracticalConfig::new(0.05, 0.05, 1.0), &spec.domain, tasks, &OgdRunner::new(spec.domain.clone()))?;
    println!("learned per-coordinate rates: {:?}", run.eta.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>());
    for t in [1, 10, 100, 300] {
        let row = &run.rows[t - 1];
        println!("task {t:>3}: rate min {:.4} mean {:.4} max {:.4}", row.eta_min, row.eta_mean, row.eta_max);
    }
    Ok(())
}
