//! Divergences and mirror steps under the Euclidean and entropic geometries.

use aruba::domain::Domain;
use aruba::error::Result;
use aruba::geometry::Geometry;
use aruba::param::ParamVector;

fn main() -> Result<()> {
    let phi = ParamVector::new(vec![0.25, 0.25, 0.5])?;
    let theta = ParamVector::new(vec![0.6, 0.3, 0.1])?;
    for geometry in [Geometry::Euclidean, Geometry::NegativeEntropy] {
        println!("{geometry:?}: Breg(θ‖φ) = {:.5}", geometry.bregman(&theta, &phi)?);
    }

    let simplex = Domain::simplex(3)?;
    let gradient_sum = ParamVector::new(vec![1.0, 0.0, -1.0])?;
    for eta in [0.1, 1.0, 5.0] {
        let entropic = Geometry::NegativeEntropy.mirror_step(&simplex, &phi, eta, &gradient_sum)?;
        let projected = Geometry::Euclidean.mirror_step(&simplex, &phi, eta, &gradient_sum)?;
        println!("η = {eta}: multiplicative weights {:?}, projected step {:?}", entropic.as_slice(), projected.as_slice());
    }
    Ok(())
}
