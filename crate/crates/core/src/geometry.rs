//! Strongly convex regularizers and their Bregman divergences.
//!
//! Two geometries are supported: the Euclidean regularizer `½‖θ‖²` (online
//! gradient descent within a task) and negative entropy `Σ θ log θ` on the
//! probability simplex (multiplicative weights). Both are 1-strongly convex,
//! w.r.t. `‖·‖₂` and `‖·‖₁` respectively.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainKind};
use crate::error::{invalid, ArubaError, Result};
use crate::param::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    #[default]
    Euclidean,
    NegativeEntropy,
}

impl Geometry {
    /// Breg_R(θ‖φ) = R(θ) − R(φ) − ⟨∇R(φ), θ − φ⟩.
    pub fn bregman(&self, theta: &ParamVector, phi: &ParamVector) -> Result<f64> {
        theta.same_dim(phi)?;
        if !theta.is_finite() || !phi.is_finite() {
            return Err(invalid("bregman divergence of a non-finite vector"));
        }
        match self {
            Geometry::Euclidean => {
                let d = theta.sub(phi);
                Ok(0.5 * d.dot(&d))
            }
            Geometry::NegativeEntropy => {
                let mut total = 0.0;
                for (j, (&t, &p)) in theta.iter().zip(phi.iter()).enumerate() {
                    if p <= 0.0 {
                        return Err(ArubaError::Boundary(format!(
                            "entropy divergence needs a strictly positive anchor, coordinate {j} is {p}"
                        )));
                    }
                    if t < 0.0 {
                        return Err(ArubaError::Boundary(format!(
                            "entropy divergence of a negative coordinate {j} ({t})"
                        )));
                    }
                    let tlog = if t == 0.0 { 0.0 } else { t * (t / p).ln() };
                    total += tlog - t + p;
                }
                // Roundoff can leave a tiny negative value when θ ≈ φ.
                Ok(total.max(0.0))
            }
        }
    }

    /// Gradient of the regularizer, ∇R(φ).
    pub fn mirror_map(&self, phi: &ParamVector) -> Result<ParamVector> {
        match self {
            Geometry::Euclidean => Ok(phi.clone()),
            Geometry::NegativeEntropy => {
                if phi.iter().any(|&p| p <= 0.0) {
                    return Err(ArubaError::Boundary(
                        "entropy mirror map needs strictly positive coordinates".into(),
                    ));
                }
                Ok(phi.map(|p| p.ln() + 1.0))
            }
        }
    }

    /// Primal norm the regularizer is 1-strongly convex in.
    pub fn norm(&self, x: &ParamVector) -> f64 {
        match self {
            Geometry::Euclidean => x.norm(),
            Geometry::NegativeEntropy => x.norm_l1(),
        }
    }

    /// Dual norm, used for gradients.
    pub fn dual_norm(&self, g: &ParamVector) -> f64 {
        match self {
            Geometry::Euclidean => g.norm(),
            Geometry::NegativeEntropy => g.norm_inf(),
        }
    }

    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        match (self, domain.kind()) {
            (Geometry::NegativeEntropy, DomainKind::Simplex { .. }) | (Geometry::Euclidean, _) => {
                Ok(())
            }
            (Geometry::NegativeEntropy, _) => Err(ArubaError::Unsupported(
                "negative entropy geometry is only defined on the simplex".into(),
            )),
        }
    }

    /// argmin_{θ∈Θ} Breg(θ‖φ) + η⟨g, θ⟩ for a scalar rate η.
    pub fn mirror_step(
        &self,
        domain: &Domain,
        phi: &ParamVector,
        eta: f64,
        gradient_sum: &ParamVector,
    ) -> Result<ParamVector> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(invalid(format!("learning rate must be positive, got {eta}")));
        }
        phi.same_dim(gradient_sum)?;
        match self {
            Geometry::Euclidean => domain.project(*self, &phi.axpy(-eta, gradient_sum), None),
            Geometry::NegativeEntropy => {
                self.check_domain(domain)?;
                let logits: Vec<f64> = phi
                    .iter()
                    .zip(gradient_sum.iter())
                    .map(|(&p, &g)| if p > 0.0 { p.ln() - eta * g } else { f64::NEG_INFINITY })
                    .collect();
                Ok(softmax(&logits))
            }
        }
    }
}

/// Normalized exponentials, computed with max subtraction.
pub(crate) fn softmax(logits: &[f64]) -> ParamVector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    ParamVector::from_vec(exps.into_iter().map(|e| e / z).collect())
}
