use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, Result};
use crate::loss::LossOracle;
use crate::param::ParamVector;

/// A sequence of m losses revealed one at a time, plus its declared
/// root-mean-square Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    losses: Vec<LossOracle>,
    lipschitz_rms: f64,
}

impl Task {
    /// Declares the smallest admissible constant, sqrt of the mean squared
    /// per-loss bound on `domain`.
    pub fn new(losses: Vec<LossOracle>, domain: &Domain) -> Result<Self> {
        let rms = Self::check_losses(&losses, domain)?;
        Ok(Self { losses, lipschitz_rms: rms })
    }

    /// Declares `lipschitz_rms`, which must dominate the per-loss bounds.
    pub fn with_lipschitz(losses: Vec<LossOracle>, lipschitz_rms: f64, domain: &Domain) -> Result<Self> {
        let rms = Self::check_losses(&losses, domain)?;
        if !(lipschitz_rms >= 0.0) || lipschitz_rms.is_nan() {
            return Err(invalid(format!("Lipschitz constant must be nonnegative, got {lipschitz_rms}")));
        }
        if lipschitz_rms < rms * (1.0 - 1e-12) {
            return Err(invalid(format!(
                "declared Lipschitz constant {lipschitz_rms} is below the per-loss RMS bound {rms}"
            )));
        }
        Ok(Self { losses, lipschitz_rms })
    }

    fn check_losses(losses: &[LossOracle], domain: &Domain) -> Result<f64> {
        if losses.is_empty() {
            return Err(invalid("a task needs at least one loss"));
        }
        let d = domain.dim();
        if let Some(i) = losses.iter().position(|l| l.dim() != d) {
            return Err(invalid(format!(
                "loss {i} has dimension {}, domain has {d}",
                losses[i].dim()
            )));
        }
        let mean_sq = losses
            .iter()
            .map(|l| l.lipschitz_bound(domain).powi(2))
            .sum::<f64>()
            / losses.len() as f64;
        Ok(mean_sq.sqrt())
    }

    pub fn losses(&self) -> &[LossOracle] {
        &self.losses
    }

    pub fn m(&self) -> usize {
        self.losses.len()
    }

    pub fn dim(&self) -> usize {
        self.losses[0].dim()
    }

    pub fn lipschitz_rms(&self) -> f64 {
        self.lipschitz_rms
    }

    pub fn total_value(&self, theta: &ParamVector) -> f64 {
        self.losses.iter().map(|l| l.value(theta)).sum()
    }

    pub fn total_gradient(&self, theta: &ParamVector) -> ParamVector {
        let mut g = ParamVector::zeros(theta.dim());
        for l in &self.losses {
            g.add_assign(&l.gradient(theta));
        }
        g
    }

    /// The task with every loss multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Ok(Self {
            losses: self.losses.iter().map(|l| l.scaled(c)).collect::<Result<_>>()?,
            lipschitz_rms: self.lipschitz_rms * c,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_constant_dominates_rms() {
        let domain = Domain::cube(2, 1.0).unwrap();
        let losses = vec![
            LossOracle::linear(ParamVector::new(vec![3.0, 4.0]).unwrap()),
            LossOracle::linear(ParamVector::new(vec![0.0, 0.0]).unwrap()),
        ];
        let task = Task::new(losses.clone(), &domain).unwrap();
        let rms = (25.0f64 / 2.0).sqrt();
        assert!((task.lipschitz_rms() - rms).abs() < 1e-12);
        assert!(Task::with_lipschitz(losses.clone(), 3.0, &domain).is_err());
        assert!(Task::with_lipschitz(losses, 5.0, &domain).is_ok());
    }

    #[test]
    fn empty_task_rejected() {
        assert!(Task::new(vec![], &Domain::cube(1, 1.0).unwrap()).is_err());
    }
}
