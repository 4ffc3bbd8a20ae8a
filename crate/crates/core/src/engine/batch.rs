use serde::{Deserialize, Serialize};

use super::stream::{MetaRun, MetaScale};
use crate::environments::DistributionalEnv;
use crate::error::{invalid, Result};
use crate::geometry::Geometry;
use crate::param::ParamVector;
use crate::within_task::{run_task, Mode, WithinTaskConfig};

/// Uniform averages of the per-task initializations and scale states.
pub fn online_to_batch(run: &MetaRun) -> Result<(ParamVector, MetaScale)> {
    if run.phis.is_empty() {
        return Err(invalid("cannot convert an empty run"));
    }
    Ok((ParamVector::mean_of(&run.phis)?, MetaScale::average(&run.scales)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskOptions {
    pub n_test_tasks: usize,
    /// Training losses per test task.
    pub m: usize,
    pub n_risk_samples: usize,
    pub geometry: Geometry,
    pub mode: Mode,
}

impl RiskOptions {
    pub fn new(n_test_tasks: usize, m: usize, n_risk_samples: usize) -> Self {
        Self { n_test_tasks, m, n_risk_samples, geometry: Geometry::Euclidean, mode: Mode::OmdLinearized }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Mean of ℓ_P(θ̄) − min ℓ_P over the test tasks, when known in closed form.
    pub population_excess: Option<f64>,
}

/// Monte-Carlo transfer risk of running the within-task learner from
/// `phi` with `scale` and deploying its average iterate.
pub fn transfer_risk_estimate(
    phi: &ParamVector,
    scale: &MetaScale,
    env: &DistributionalEnv,
    options: &RiskOptions,
) -> Result<RiskEstimate> {
    if options.n_test_tasks == 0 {
        return Err(invalid("n_test_tasks must be at least 1"));
    }
    if options.m == 0 || options.n_risk_samples == 0 {
        return Err(invalid("m and n_risk_samples must be at least 1"));
    }
    let domain = &env.spec().domain;
    let mut risks = Vec::with_capacity(options.n_test_tasks);
    let mut excess_total = Some(0.0);
    for i in 0..options.n_test_tasks {
        let sampled = env.test_task(i, options.m)?;
        let task = &sampled.task;
        let within = WithinTaskConfig::new(
            options.geometry,
            domain.clone(),
            phi.clone(),
            scale.to_scale(task.lipschitz_rms(), task.m())?,
            options.mode,
        )?;
        let deployed = run_task(&within, task)?.average_iterate();
        let held_out = env.held_out_losses(&sampled.center, i, options.n_risk_samples)?;
        risks.push(held_out.iter().map(|l| l.value(&deployed)).sum::<f64>() / held_out.len() as f64);
        excess_total = match (excess_total, env.population_risk(&sampled.center, &deployed)) {
            (Some(acc), Ok(r)) => Some(acc + r - env.population_risk(&sampled.center, &sampled.center)?),
            _ => None,
        };
    }
    let n = risks.len() as f64;
    let mean = risks.iter().sum::<f64>() / n;
    let std_error = if risks.len() > 1 {
        (risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(RiskEstimate { mean, std_error, population_excess: excess_total.map(|e| e / n) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::LedgerRow;

    fn run_with(phis: Vec<ParamVector>, scales: Vec<MetaScale>) -> MetaRun {
        MetaRun {
            rows: Vec::<LedgerRow>::new(),
            final_phi: phis[0].clone(),
            final_scale: scales[0].clone(),
            updates: phis.clone(),
            phis,
            scales,
        }
    }

    #[test]
    fn averages_states() {
        let pv = |v: &[f64]| ParamVector::new(v.to_vec()).unwrap();
        let run = run_with(vec![pv(&[0.0, 0.0]), pv(&[2.0, 0.0])], vec![MetaScale::V(0.1), MetaScale::V(0.3)]);
        let (phi, scale) = online_to_batch(&run).unwrap();
        assert_eq!(phi, pv(&[1.0, 0.0]));
        match scale {
            MetaScale::V(v) => assert!((v - 0.2).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        let run = run_with(vec![pv(&[1.5]); 3], vec![MetaScale::Eta(0.4); 3]);
        assert_eq!(online_to_batch(&run).unwrap(), (pv(&[1.5]), MetaScale::Eta(0.4)));
    }

    #[test]
    fn empty_run_is_rejected() {
        let run = MetaRun {
            rows: vec![],
            phis: vec![],
            scales: vec![],
            updates: vec![],
            final_phi: ParamVector::zeros(1),
            final_scale: MetaScale::V(1.0),
        };
        assert!(online_to_batch(&run).is_err());
    }
}
