use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, Result};
use crate::param::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LossFamily {
    /// (weight/2)·‖θ − target‖²
    Quadratic { target: ParamVector, weight: f64 },
    /// ⟨gradient, θ⟩
    Linear { gradient: ParamVector },
    /// weight·log(1 + exp(−label·⟨feature, θ⟩)), label ∈ {−1, 1}
    Logistic { feature: ParamVector, label: f64, weight: f64 },
}

/// A convex per-round loss with value and gradient oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossOracle {
    family: LossFamily,
}

impl LossOracle {
    pub fn quadratic(target: ParamVector, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(invalid(format!("quadratic weight must be nonnegative, got {weight}")));
        }
        Ok(Self { family: LossFamily::Quadratic { target, weight } })
    }

    pub fn linear(gradient: ParamVector) -> Self {
        Self { family: LossFamily::Linear { gradient } }
    }

    pub fn logistic(feature: ParamVector, label: f64) -> Result<Self> {
        if label != 1.0 && label != -1.0 {
            return Err(invalid(format!("logistic label must be ±1, got {label}")));
        }
        Ok(Self { family: LossFamily::Logistic { feature, label, weight: 1.0 } })
    }

    pub fn family(&self) -> &LossFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            LossFamily::Quadratic { target, .. } => target.dim(),
            LossFamily::Linear { gradient } => gradient.dim(),
            LossFamily::Logistic { feature, .. } => feature.dim(),
        }
    }

    /// The same loss multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(invalid(format!("loss scale must be positive, got {c}")));
        }
        let family = match &self.family {
            LossFamily::Quadratic { target, weight } => {
                LossFamily::Quadratic { target: target.clone(), weight: weight * c }
            }
            LossFamily::Linear { gradient } => LossFamily::Linear { gradient: gradient.scale(c) },
            LossFamily::Logistic { feature, label, weight } => LossFamily::Logistic {
                feature: feature.clone(),
                label: *label,
                weight: weight * c,
            },
        };
        Ok(Self { family })
    }

    pub fn value(&self, theta: &ParamVector) -> f64 {
        match &self.family {
            LossFamily::Quadratic { target, weight } => {
                let d = theta.sub(target);
                0.5 * weight * d.dot(&d)
            }
            LossFamily::Linear { gradient } => gradient.dot(theta),
            LossFamily::Logistic { feature, label, weight } => {
                weight * softplus(-label * feature.dot(theta))
            }
        }
    }

    pub fn gradient(&self, theta: &ParamVector) -> ParamVector {
        match &self.family {
            LossFamily::Quadratic { target, weight } => theta.sub(target).scale(*weight),
            LossFamily::Linear { gradient } => gradient.clone(),
            LossFamily::Logistic { feature, label, weight } => {
                let margin = label * feature.dot(theta);
                feature.scale(-weight * label * sigmoid(-margin))
            }
        }
    }

    /// Upper bound on ‖∇ℓ(θ)‖₂ over the domain (infinite if the domain is
    /// unbounded and the loss is not linear-like).
    pub fn lipschitz_bound(&self, domain: &Domain) -> f64 {
        match &self.family {
            LossFamily::Quadratic { target, weight } => {
                if *weight == 0.0 {
                    0.0
                } else {
                    weight * domain.max_distance_from(target)
                }
            }
            LossFamily::Linear { gradient } => gradient.norm(),
            LossFamily::Logistic { feature, weight, .. } => weight * feature.norm(),
        }
    }

    pub(crate) fn is_quadratic_or_linear(&self) -> bool {
        !matches!(self.family, LossFamily::Logistic { .. })
    }

    pub(crate) fn is_linear(&self) -> bool {
        matches!(self.family, LossFamily::Linear { .. })
    }
}

/// log(1 + eˣ) without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn central_difference(loss: &LossOracle, theta: &ParamVector) -> Vec<f64> {
        (0..theta.dim())
            .map(|j| {
                let h = 1e-6 * (1.0 + theta[j].abs());
                let mut up = theta.as_slice().to_vec();
                let mut dn = up.clone();
                up[j] += h;
                dn[j] -= h;
                (loss.value(&pv(&up)) - loss.value(&pv(&dn))) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn logistic_is_stable_at_large_margins() {
        let loss = LossOracle::logistic(pv(&[1.0]), 1.0).unwrap();
        assert!(loss.value(&pv(&[800.0])) >= 0.0);
        assert!((loss.value(&pv(&[-800.0])) - 800.0).abs() < 1e-9);
        assert!(loss.gradient(&pv(&[-800.0])).is_finite());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeedStream::new(11).rng();
        let domain = Domain::ball_at_origin(3, 2.0).unwrap();
        for _ in 0..100 {
            let a = domain.sample(&mut rng);
            let x = domain.sample(&mut rng);
            let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let losses = [
                LossOracle::quadratic(a.clone(), 0.7).unwrap(),
                LossOracle::linear(a.clone()),
                LossOracle::logistic(a.clone(), label).unwrap(),
            ];
            for loss in &losses {
                let g = loss.gradient(&x);
                let fd = central_difference(loss, &x);
                for j in 0..3 {
                    let scale = g[j].abs().max(1e-3);
                    assert!((g[j] - fd[j]).abs() <= 1e-6 * scale.max(1.0), "{loss:?} at {x:?}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn gradient_norm_within_lipschitz_bound(seed in any::<u64>()) {
            let mut rng = SeedStream::new(seed).rng();
            let domain = Domain::cube(4, 1.5).unwrap();
            let a = domain.sample(&mut rng);
            let losses = [
                LossOracle::quadratic(a.clone(), 1.3).unwrap(),
                LossOracle::logistic(a.clone(), -1.0).unwrap(),
            ];
            for loss in &losses {
                let g_bound = loss.lipschitz_bound(&domain);
                for _ in 0..20 {
                    let x = domain.sample(&mut rng);
                    prop_assert!(loss.gradient(&x).norm() <= g_bound + 1e-12);
                }
            }
        }

        #[test]
        fn convex_along_segments(seed in any::<u64>()) {
            let mut rng = SeedStream::new(seed).rng();
            let domain = Domain::ball_at_origin(3, 3.0).unwrap();
            let a = domain.sample(&mut rng);
            let loss = if rng.random::<bool>() {
                LossOracle::logistic(a, 1.0).unwrap()
            } else {
                LossOracle::quadratic(a, 0.5).unwrap()
            };
            let x = domain.sample(&mut rng);
            let y = domain.sample(&mut rng);
            let mid = x.add(&y).scale(0.5);
            prop_assert!(loss.value(&mid) <= 0.5 * (loss.value(&x) + loss.value(&y)) + 1e-9);
        }
    }
}
