use serde::{Deserialize, Serialize};

use super::quadrature;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum ScalarStrategy {
    Fixed { v: f64 },
    /// Closed-form follow-the-leader on the ε-regularized surrogate losses.
    EpsFtl { eps: f64, diameter: f64 },
    /// Exponentially weighted online optimization over [ε, √(D² + ε²)].
    EpsEwoo { eps: f64, diameter: f64, lipschitz: f64, m: usize },
}

/// γ = 2/(D·G·√m) · min(ε²/D², 1), the exp-concavity constant of the
/// surrogate losses.
pub fn ewoo_gamma(diameter: f64, lipschitz: f64, m: usize, eps: f64) -> f64 {
    2.0 / (diameter * lipschitz * (m as f64).sqrt()) * (eps * eps / (diameter * diameter)).min(1.0)
}

/// Learner of the within-task scale v, with η = v/(G√m).
#[derive(Debug, Clone)]
pub struct ScalarScaleState {
    strategy: ScalarStrategy,
    history: Vec<(f64, f64)>,
    /// Σσ(B² + ε²)
    weighted_loss: f64,
    /// Σσ
    weight_total: f64,
}

impl ScalarScaleState {
    pub fn new(strategy: ScalarStrategy) -> Result<Self> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {x}")))
            }
        };
        match strategy {
            ScalarStrategy::Fixed { v } => positive("v", v)?,
            ScalarStrategy::EpsFtl { eps, diameter } => {
                if !(eps >= 0.0) || !eps.is_finite() {
                    return Err(invalid(format!("ε must be nonnegative and finite, got {eps}")));
                }
                positive("D", diameter)?;
            }
            ScalarStrategy::EpsEwoo { eps, diameter, lipschitz, m } => {
                positive("ε", eps)?;
                positive("D", diameter)?;
                positive("G", lipschitz)?;
                if m == 0 {
                    return Err(invalid("task length m must be at least 1"));
                }
            }
        }
        Ok(Self { strategy, history: Vec::new(), weighted_loss: 0.0, weight_total: 0.0 })
    }

    pub fn strategy(&self) -> ScalarStrategy {
        self.strategy
    }

    /// Observed (B², σ) pairs, in order.
    pub fn history(&self) -> &[(f64, f64)] {
        &self.history
    }

    /// [ε, √(D² + ε²)] for the learned strategies.
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self.strategy {
            ScalarStrategy::Fixed { .. } => None,
            ScalarStrategy::EpsFtl { eps, diameter } | ScalarStrategy::EpsEwoo { eps, diameter, .. } => {
                Some((eps, (diameter * diameter + eps * eps).sqrt()))
            }
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.strategy {
            ScalarStrategy::EpsEwoo { eps, diameter, lipschitz, m } => Some(ewoo_gamma(diameter, lipschitz, m, eps)),
            _ => None,
        }
    }

    /// Records B² = Breg(θ̂‖φ) for the finished task, with weight σ = G√m.
    pub fn observe(&mut self, divergence: f64, sigma: f64) -> Result<()> {
        if !(divergence >= 0.0) || !divergence.is_finite() {
            return Err(invalid(format!("divergence must be nonnegative, got {divergence}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("task weight σ must be positive, got {sigma}")));
        }
        let eps = match self.strategy {
            ScalarStrategy::Fixed { .. } => 0.0,
            ScalarStrategy::EpsFtl { eps, .. } | ScalarStrategy::EpsEwoo { eps, .. } => eps,
        };
        self.history.push((divergence, sigma));
        self.weighted_loss += sigma * (divergence + eps * eps);
        self.weight_total += sigma;
        Ok(())
    }

    pub fn v(&self) -> Result<f64> {
        match self.strategy {
            ScalarStrategy::Fixed { v } => Ok(v),
            ScalarStrategy::EpsFtl { .. } => {
                let (lo, hi) = self.interval().expect("learned strategy");
                if self.history.is_empty() {
                    return Ok(0.5 * (lo + hi));
                }
                Ok((self.weighted_loss / self.weight_total).sqrt())
            }
            ScalarStrategy::EpsEwoo { .. } => {
                let (lo, hi) = self.interval().expect("learned strategy");
                if self.history.is_empty() {
                    return Ok(0.5 * (lo + hi));
                }
                let gamma = self.gamma().expect("ewoo");
                ewoo_mean(gamma, self.weighted_loss, self.weight_total, lo, hi)
            }
        }
    }
}

/// Mean of the density ∝ exp(−γ(s1/v + s0·v)) on [lo, hi].
pub(crate) fn ewoo_mean(gamma: f64, s1: f64, s0: f64, lo: f64, hi: f64) -> Result<f64> {
    let exponent = |v: f64| gamma * (s1 / v + s0 * v);
    let mode = if s0 > 0.0 { (s1 / s0).sqrt().clamp(lo, hi) } else { hi };
    let floor = exponent(mode);
    let density = |v: f64| (floor - exponent(v)).exp();
    let mut breaks = vec![lo];
    if mode > lo && mode < hi {
        breaks.push(mode);
    }
    breaks.push(hi);
    let numer = quadrature::integrate(
        |v| v * density(v),
        &breaks,
        64,
        quadrature::RELATIVE_TOLERANCE,
        quadrature::MAX_SUBDIVISIONS,
    )?;
    let denom = quadrature::integrate(
        density,
        &breaks,
        64,
        quadrature::RELATIVE_TOLERANCE,
        quadrature::MAX_SUBDIVISIONS,
    )?;
    Ok((numer / denom).clamp(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_ftl_examples() {
        let mut s = ScalarScaleState::new(ScalarStrategy::EpsFtl { eps: 0.5, diameter: 1.0 }).unwrap();
        s.observe(0.0, 1.0).unwrap();
        assert_eq!(s.v().unwrap(), 0.5);

        let mut s = ScalarScaleState::new(ScalarStrategy::EpsFtl { eps: 0.0, diameter: 1.0 }).unwrap();
        s.observe(1.0, 1.0).unwrap();
        s.observe(3.0, 1.0).unwrap();
        assert!((s.v().unwrap() - 2f64.sqrt()).abs() < 1e-15);

        let mut s = ScalarScaleState::new(ScalarStrategy::EpsFtl { eps: 1.0, diameter: 1.0 }).unwrap();
        s.observe(4.0, 1.0).unwrap();
        s.observe(0.0, 3.0).unwrap();
        assert!((s.v().unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cold_start_is_interval_midpoint() {
        let s = ScalarScaleState::new(ScalarStrategy::EpsEwoo { eps: 0.5, diameter: 1.0, lipschitz: 1.0, m: 1 })
            .unwrap();
        assert_eq!(s.v().unwrap(), 0.5 * (0.5 + 1.25f64.sqrt()));
    }

    #[test]
    fn gamma_formula() {
        assert_eq!(ewoo_gamma(1.0, 1.0, 1, 1.0), 2.0);
        assert_eq!(ewoo_gamma(2.0, 1.0, 4, 1.0), 2.0 / 4.0 * 0.25);
    }
}
