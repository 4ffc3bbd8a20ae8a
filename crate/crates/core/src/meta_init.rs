//! Learning the within-task initialization across tasks.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, ArubaError, Result};
use crate::geometry::Geometry;
use crate::param::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum InitStrategy {
    /// Follow-the-leader: the σ-weighted mean of past meta-update vectors.
    #[default]
    FtlMean,
    /// Adaptive online gradient descent with step 1/σ_{1:t}.
    Aogd,
    /// Online gradient descent tracking a moving comparator.
    OgdDynamic { lambda: f64 },
}

impl InitStrategy {
    pub fn validate(&self, geometry: Geometry) -> Result<()> {
        match self {
            InitStrategy::FtlMean => Ok(()),
            InitStrategy::Aogd | InitStrategy::OgdDynamic { .. } if geometry != Geometry::Euclidean => Err(
                ArubaError::Unsupported(format!("{self:?} requires the Euclidean geometry")),
            ),
            InitStrategy::OgdDynamic { lambda } if !(*lambda > 0.0 && *lambda <= 1.0) => {
                Err(invalid(format!("dynamic step λ must lie in (0, 1], got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InitState {
    strategy: InitStrategy,
    domain: Domain,
    phi: ParamVector,
    weighted_sum: ParamVector,
    weight_total: f64,
    alpha_total: f64,
    updates: usize,
}

impl InitState {
    /// Starts at `phi` or, if absent, the center of the domain.
    pub fn new(strategy: InitStrategy, geometry: Geometry, domain: Domain, phi: Option<ParamVector>) -> Result<Self> {
        strategy.validate(geometry)?;
        let phi = phi.unwrap_or_else(|| domain.center());
        if !domain.contains(&phi, 1e-9) {
            return Err(invalid("initial φ lies outside the domain"));
        }
        let d = domain.dim();
        Ok(Self {
            strategy,
            domain,
            phi,
            weighted_sum: ParamVector::zeros(d),
            weight_total: 0.0,
            alpha_total: 0.0,
            updates: 0,
        })
    }

    pub fn strategy(&self) -> InitStrategy {
        self.strategy
    }

    pub fn phi(&self) -> &ParamVector {
        &self.phi
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Feeds the meta-update vector of the task just completed with weight
    /// σ = G√m, and returns the next initialization.
    pub fn update(&mut self, theta_hat: &ParamVector, sigma: f64) -> Result<&ParamVector> {
        theta_hat.same_dim(&self.phi)?;
        if !theta_hat.is_finite() {
            return Err(invalid("meta-update vector is not finite"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("task weight σ must be positive, got {sigma}")));
        }
        self.weighted_sum.add_scaled_assign(sigma, theta_hat);
        self.weight_total += sigma;
        self.alpha_total += sigma;
        let next = match self.strategy {
            InitStrategy::FtlMean => self.weighted_sum.scale(1.0 / self.weight_total),
            InitStrategy::Aogd => {
                let step = sigma / self.alpha_total;
                let moved = self.phi.axpy(-step, &self.phi.sub(theta_hat));
                self.domain.project(Geometry::Euclidean, &moved, None)?
            }
            InitStrategy::OgdDynamic { lambda } => {
                let moved = self.phi.axpy(-lambda, &self.phi.sub(theta_hat));
                self.domain.project(Geometry::Euclidean, &moved, None)?
            }
        };
        self.phi = next;
        self.updates += 1;
        Ok(&self.phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn state(strategy: InitStrategy, d: usize) -> InitState {
        InitState::new(strategy, Geometry::Euclidean, Domain::cube(d, 10.0).unwrap(), None).unwrap()
    }

    #[test]
    fn ftl_mean_examples() {
        let mut s = state(InitStrategy::FtlMean, 2);
        assert_eq!(s.update(&pv(&[0.0, 0.0]), 1.0).unwrap(), &pv(&[0.0, 0.0]));
        assert_eq!(s.update(&pv(&[2.0, 2.0]), 1.0).unwrap(), &pv(&[1.0, 1.0]));

        let mut s = state(InitStrategy::FtlMean, 1);
        s.update(&pv(&[0.0]), 1.0).unwrap();
        assert_eq!(s.update(&pv(&[4.0]), 3.0).unwrap(), &pv(&[3.0]));

        let mut s = state(InitStrategy::FtlMean, 3);
        assert_eq!(s.update(&pv(&[1.0, -2.0, 0.5]), 0.7).unwrap(), &pv(&[1.0, -2.0, 0.5]));
    }

    #[test]
    fn aogd_examples() {
        let mut s = state(InitStrategy::Aogd, 2);
        assert_eq!(s.update(&pv(&[1.0, 1.0]), 2.0).unwrap(), &pv(&[1.0, 1.0]));
        assert_eq!(s.update(&pv(&[3.0, 1.0]), 2.0).unwrap(), &pv(&[2.0, 1.0]));
        let fixed = s.phi().clone();
        assert_eq!(s.update(&fixed, 2.0).unwrap(), &fixed);
    }

    #[test]
    fn dynamic_ogd_examples() {
        let mut s = state(InitStrategy::OgdDynamic { lambda: 0.5 }, 2);
        assert_eq!(s.update(&pv(&[2.0, 0.0]), 1.0).unwrap(), &pv(&[1.0, 0.0]));
        let mut s = state(InitStrategy::OgdDynamic { lambda: 1.0 }, 2);
        assert_eq!(s.update(&pv(&[2.0, -3.0]), 1.0).unwrap(), &pv(&[2.0, -3.0]));
        assert!(InitState::new(
            InitStrategy::OgdDynamic { lambda: 0.0 },
            Geometry::Euclidean,
            Domain::cube(1, 1.0).unwrap(),
            None
        )
        .is_err());
    }

    #[test]
    fn aogd_requires_euclidean() {
        let err = InitState::new(
            InitStrategy::Aogd,
            Geometry::NegativeEntropy,
            Domain::simplex(3).unwrap(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ArubaError::Unsupported(_)));
    }
}
