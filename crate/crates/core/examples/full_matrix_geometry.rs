//! A full-matrix step size picks up correlated task variation that a
//! diagonal one cannot represent.

use aruba::domain::Domain;
use aruba::engine::{run_meta_stream, MetaRunConfig, SimStrategy};
use aruba::environments::{gen_geometry, EnvKind, EnvSpec, LossKind};
use aruba::meta_init::InitStrategy;
use aruba::meta_scale::riccati_h;
use aruba::param::ParamVector;
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let b2 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let g2 = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 3.0]);
    let h = riccati_h(&b2, &g2)?;
    println!("H solving H G² H = B²:\n{h:.4}residual {:.2e}", (&h * &g2 * &h - &b2).norm());

    let dim = 4;
    let spec = EnvSpec {
        kind: EnvKind::Geometry { spread: ParamVector::new(vec![0.5, 0.05, 0.02, 0.02])?, rotate: true },
        dim,
        m: 20,
        tasks: 300,
        family: LossKind::Quadratic,
        domain: Domain::cube(dim, 2.0)?,
        lipschitz: 1.0,
        noise: 0.1,
        center: None,
        seed: 2,
    };
    let tasks = gen_geometry(&spec)?.tasks;
    for (label, sim) in [("diagonal", SimStrategy::diagonal_default(spec.m)), ("matrix", SimStrategy::Matrix { eps: None, zeta: None })] {
        let config = MetaRunConfig::new(spec.domain.clone(), spec.tasks, InitStrategy::FtlMean, sim);
        let run = run_meta_stream(&config, tasks.clone())?;
        let last = run.rows.last().expect("tasks");
        println!("{label:>8}: final TAR {:.4}, RUB {:.4}", last.tar, last.rub);
    }
    Ok(())
}
