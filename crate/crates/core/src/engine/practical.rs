use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, Result};
use crate::geometry::Geometry;
use crate::meta_init::{InitState, InitStrategy};
use crate::meta_scale::DiagScaleState;
use crate::param::ParamVector;
use crate::task::Task;
use crate::within_task::{run_task, Mode, Scale, WithinTaskConfig};

/// What a within-task method reports back to the meta-learner.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentOutcome {
    pub gradients: Vec<ParamVector>,
    /// θ̂_t, the parameter the method ended the task with.
    pub final_param: ParamVector,
    /// Within-task regret, when the runner can compute it.
    pub regret: Option<f64>,
}

/// A gradient-based within-task method driven by an initialization and a
/// per-coordinate rate.
pub trait DescentRunner {
    fn descend(&self, task: &Task, init: &ParamVector, eta: &ParamVector) -> Result<DescentOutcome>;
}

/// Projected online gradient descent with a per-coordinate rate.
#[derive(Debug, Clone)]
pub struct OgdRunner {
    domain: Domain,
}

impl OgdRunner {
    pub fn new(domain: Domain) -> Self {
        Self { domain }
    }
}

impl DescentRunner for OgdRunner {
    fn descend(&self, task: &Task, init: &ParamVector, eta: &ParamVector) -> Result<DescentOutcome> {
        let config = WithinTaskConfig::new(
            Geometry::Euclidean,
            self.domain.clone(),
            init.clone(),
            Scale::Diagonal(eta.clone()),
            Mode::OmdLinearized,
        )?;
        let trace = run_task(&config, task)?;
        Ok(DescentOutcome { gradients: trace.gradients, final_param: trace.final_iterate, regret: Some(trace.regret) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PracticalConfig {
    pub eps: f64,
    pub zeta: f64,
    pub p: f64,
    pub init: InitStrategy,
}

impl PracticalConfig {
    pub fn new(eps: f64, zeta: f64, p: f64) -> Self {
        Self { eps, zeta, p, init: InitStrategy::FtlMean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticalRow {
    pub t: usize,
    pub regret: Option<f64>,
    pub eta_min: f64,
    pub eta_mean: f64,
    pub eta_max: f64,
    pub phi_drift: f64,
}

#[derive(Debug, Clone)]
pub struct PracticalRun {
    pub phi: ParamVector,
    pub eta: ParamVector,
    pub state: DiagScaleState,
    pub rows: Vec<PracticalRow>,
    /// Rate used on each task.
    pub etas: Vec<ParamVector>,
}

/// Learns an initialization and a per-coordinate rate from observed
/// gradients only; tasks are weighted equally.
pub fn aruba_practical<I, R>(
    config: &PracticalConfig,
    domain: &Domain,
    tasks: I,
    runner: &R,
) -> Result<PracticalRun>
where
    I: IntoIterator<Item = Task>,
    R: DescentRunner + ?Sized,
{
    let mut init = InitState::new(config.init, Geometry::Euclidean, domain.clone(), None)?;
    let mut state = DiagScaleState::new(domain.dim(), config.eps, config.zeta, config.p)?;
    let mut rows = Vec::new();
    let mut etas = Vec::new();
    for (index, task) in tasks.into_iter().enumerate() {
        let phi = init.phi().clone();
        let eta = state.eta();
        let outcome = runner.descend(&task, &phi, &eta)?;
        let mut grad_sq = ParamVector::zeros(domain.dim());
        for g in &outcome.gradients {
            grad_sq.add_assign(&g.squared());
        }
        state.accumulate(&phi, &outcome.final_param, &grad_sq)?;
        let next = init.update(&outcome.final_param, 1.0)?;
        rows.push(PracticalRow {
            t: index + 1,
            regret: outcome.regret,
            eta_min: eta.min(),
            eta_mean: eta.mean(),
            eta_max: eta.max(),
            phi_drift: next.distance(&phi),
        });
        etas.push(eta);
    }
    if rows.is_empty() {
        return Err(invalid("the environment produced no tasks"));
    }
    Ok(PracticalRun { phi: init.phi().clone(), eta: state.eta(), state, rows, etas })
}
