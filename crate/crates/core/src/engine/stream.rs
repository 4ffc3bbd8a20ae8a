use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain, DomainKind};
use crate::error::{invalid, ArubaError, Result};
use crate::geometry::Geometry;
use crate::meta_init::{InitState, InitStrategy};
use crate::meta_scale::{DiagScaleState, IsotropicScaleState, MatrixScaleState, ScalarScaleState, ScalarStrategy};
use crate::param::ParamVector;
use crate::task::Task;
use crate::within_task::{run_task, Mode, Scale, TaskTrace, WithinTaskConfig};

/// How the scale of the within-task learner is set from task to task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SimStrategy {
    Fixed { v: f64 },
    EpsFtl { eps: f64 },
    /// `eps` defaults to T^(−1/4).
    EpsEwoo { eps: Option<f64> },
    Isotropic { eps: f64, zeta: f64, p: f64 },
    Diagonal { eps: f64, zeta: f64, p: f64 },
    /// `eps` defaults to T^(−1/8), `zeta` to √m·T^(−1/8).
    Matrix { eps: Option<f64>, zeta: Option<f64> },
}

impl SimStrategy {
    /// ε = 1, ζ = √m, p = 2/5.
    pub fn diagonal_default(m: usize) -> Self {
        SimStrategy::Diagonal { eps: 1.0, zeta: (m as f64).sqrt(), p: 0.4 }
    }

    fn is_scalar(&self) -> bool {
        matches!(self, SimStrategy::Fixed { .. } | SimStrategy::EpsFtl { .. } | SimStrategy::EpsEwoo { .. })
    }
}

/// The vector fed back to the meta-learners after each task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaUpdate {
    #[default]
    OptimalAction,
    LastIterate,
    AverageIterate,
}

impl MetaUpdate {
    pub fn pick(&self, trace: &TaskTrace) -> ParamVector {
        match self {
            MetaUpdate::OptimalAction => trace.hindsight.clone(),
            MetaUpdate::LastIterate => trace.final_iterate.clone(),
            MetaUpdate::AverageIterate => trace.average_iterate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaRunConfig {
    pub dyn_strategy: InitStrategy,
    pub sim: SimStrategy,
    pub mode: Mode,
    pub update: MetaUpdate,
    pub horizon: usize,
    pub geometry: Geometry,
    pub domain: Domain,
    /// D with D² ≥ max divergence; defaults to the domain's bound.
    pub diameter: Option<f64>,
    /// φ₁; defaults to the domain center.
    pub init: Option<ParamVector>,
}

impl MetaRunConfig {
    pub fn new(domain: Domain, horizon: usize, dyn_strategy: InitStrategy, sim: SimStrategy) -> Self {
        Self {
            dyn_strategy,
            sim,
            mode: Mode::OmdLinearized,
            update: MetaUpdate::OptimalAction,
            horizon,
            geometry: Geometry::Euclidean,
            domain,
            diameter: None,
            init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ArubaError::InvalidConfig(msg.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        self.dyn_strategy
            .validate(self.geometry)
            .map_err(|e| ArubaError::InvalidConfig(e.to_string()))?;
        self.geometry
            .check_domain(&self.domain)
            .map_err(|e| ArubaError::InvalidConfig(e.to_string()))?;
        match self.sim {
            SimStrategy::Diagonal { .. } | SimStrategy::Matrix { .. } if self.geometry != Geometry::Euclidean => {
                bad("per-coordinate and matrix scales need the Euclidean geometry")
            }
            SimStrategy::Diagonal { .. } if matches!(self.domain.kind(), DomainKind::Simplex { .. }) => {
                bad("per-coordinate scales are not supported on the simplex")
            }
            SimStrategy::Matrix { .. }
                if !matches!(self.domain.kind(), DomainKind::Box { .. } | DomainKind::Unconstrained { .. }) =>
            {
                bad("matrix scales need a box or unconstrained domain")
            }
            _ => Ok(()),
        }
    }

    fn diameter(&self) -> Result<f64> {
        match self.diameter {
            Some(d) if d > 0.0 && d.is_finite() => Ok(d),
            Some(d) => Err(invalid(format!("diameter bound must be positive, got {d}"))),
            None => self.domain.diameter_bound(self.geometry),
        }
    }
}

/// One row of the experiment ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: usize,
    pub regret: f64,
    pub upper_bound: f64,
    pub upper_bound_observed: f64,
    /// (1/t)ΣR_s
    pub tar: f64,
    /// (1/t)ΣU_s
    pub rub: f64,
    pub v: Option<f64>,
    pub eta_min: f64,
    pub eta_mean: f64,
    pub eta_max: f64,
    /// ‖φ_{t+1} − φ_t‖₂
    pub phi_drift: f64,
}

pub(crate) struct RunningAverages {
    regret: f64,
    bound: f64,
}

impl RunningAverages {
    pub(crate) fn new() -> Self {
        Self { regret: 0.0, bound: 0.0 }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn row(
        &mut self,
        t: usize,
        trace_regret: f64,
        bound: f64,
        bound_observed: f64,
        v: Option<f64>,
        scale: &Scale,
        phi_drift: f64,
    ) -> LedgerRow {
        self.regret += trace_regret;
        self.bound += bound;
        let (eta_min, eta_mean, eta_max) = scale.summary();
        LedgerRow {
            t,
            regret: trace_regret,
            upper_bound: bound,
            upper_bound_observed: bound_observed,
            tar: self.regret / t as f64,
            rub: self.bound / t as f64,
            v,
            eta_min,
            eta_mean,
            eta_max,
            phi_drift,
        }
    }
}

/// The scale state that produced a within-task rate.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaScale {
    /// η = v/(G√m)
    V(f64),
    /// A scalar rate used as is.
    Eta(f64),
    Diagonal(ParamVector),
    Matrix(DMatrix<f64>),
}

impl MetaScale {
    pub fn to_scale(&self, lipschitz: f64, m: usize) -> Result<Scale> {
        Ok(match self {
            MetaScale::V(v) => {
                let denom = lipschitz * (m as f64).sqrt();
                if !(denom > 0.0) {
                    return Err(invalid("η = v/(G√m) needs G > 0"));
                }
                Scale::Scalar(v / denom)
            }
            MetaScale::Eta(eta) => Scale::Scalar(*eta),
            MetaScale::Diagonal(eta) => Scale::Diagonal(eta.clone()),
            MetaScale::Matrix(h) => Scale::Matrix(h.clone()),
        })
    }

    /// Uniform average of states of the same kind.
    pub fn average(states: &[MetaScale]) -> Result<MetaScale> {
        let first = states.first().ok_or_else(|| invalid("cannot average an empty run"))?;
        let n = states.len() as f64;
        match first {
            MetaScale::V(_) | MetaScale::Eta(_) => {
                let (MetaScale::V(base) | MetaScale::Eta(base)) = *first else { unreachable!() };
                // Offsets from the first value keep a constant history exact.
                let mut offset = 0.0;
                for s in states {
                    match (first, s) {
                        (MetaScale::V(_), MetaScale::V(x)) | (MetaScale::Eta(_), MetaScale::Eta(x)) => offset += x - base,
                        _ => return Err(invalid("mixed scale kinds")),
                    }
                }
                let avg = base + offset / n;
                Ok(if matches!(first, MetaScale::V(_)) { MetaScale::V(avg) } else { MetaScale::Eta(avg) })
            }
            MetaScale::Diagonal(_) => {
                let vs = states
                    .iter()
                    .map(|s| match s {
                        MetaScale::Diagonal(v) => Ok(v),
                        _ => Err(invalid("mixed scale kinds")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MetaScale::Diagonal(ParamVector::mean_of(vs)?))
            }
            MetaScale::Matrix(h0) => {
                let mut acc = DMatrix::zeros(h0.nrows(), h0.ncols());
                for s in states {
                    match s {
                        MetaScale::Matrix(h) => acc += h,
                        _ => return Err(invalid("mixed scale kinds")),
                    }
                }
                Ok(MetaScale::Matrix(acc / n))
            }
        }
    }
}

/// Output of a completed meta run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaRun {
    pub rows: Vec<LedgerRow>,
    /// φ_t used on each task.
    pub phis: Vec<ParamVector>,
    /// Scale state used on each task.
    pub scales: Vec<MetaScale>,
    /// Meta-update vectors θ̂_t.
    pub updates: Vec<ParamVector>,
    pub final_phi: ParamVector,
    pub final_scale: MetaScale,
}

#[derive(Debug, Error)]
#[error("meta run aborted at task {task}: {source}")]
pub struct AbortedRun {
    pub task: usize,
    /// Ledger rows of the tasks completed before the failure.
    pub rows: Vec<LedgerRow>,
    #[source]
    pub source: ArubaError,
}

enum SimState {
    Scalar(ScalarScaleState),
    Isotropic(IsotropicScaleState),
    Diagonal(DiagScaleState),
    Matrix(MatrixScaleState),
}

impl SimState {
    fn new(config: &MetaRunConfig, first: &Task) -> Result<Self> {
        let horizon = config.horizon as f64;
        let d = config.domain.dim();
        Ok(match config.sim {
            SimStrategy::Fixed { v } => SimState::Scalar(ScalarScaleState::new(ScalarStrategy::Fixed { v })?),
            SimStrategy::EpsFtl { eps } => {
                SimState::Scalar(ScalarScaleState::new(ScalarStrategy::EpsFtl { eps, diameter: config.diameter()? })?)
            }
            SimStrategy::EpsEwoo { eps } => SimState::Scalar(ScalarScaleState::new(ScalarStrategy::EpsEwoo {
                eps: eps.unwrap_or(horizon.powf(-0.25)),
                diameter: config.diameter()?,
                lipschitz: first.lipschitz_rms(),
                m: first.m(),
            })?),
            SimStrategy::Isotropic { eps, zeta, p } => SimState::Isotropic(IsotropicScaleState::new(eps, zeta, p)?),
            SimStrategy::Diagonal { eps, zeta, p } => SimState::Diagonal(DiagScaleState::new(d, eps, zeta, p)?),
            SimStrategy::Matrix { eps, zeta } => {
                let e = eps.unwrap_or(horizon.powf(-0.125));
                let z = zeta.unwrap_or((first.m() as f64).sqrt() * horizon.powf(-0.125));
                SimState::Matrix(MatrixScaleState::new(d, e, z)?)
            }
        })
    }

    fn current(&self) -> Result<MetaScale> {
        Ok(match self {
            SimState::Scalar(s) => MetaScale::V(s.v()?),
            SimState::Isotropic(s) => MetaScale::Eta(s.eta()),
            SimState::Diagonal(s) => MetaScale::Diagonal(s.eta()),
            SimState::Matrix(s) => MetaScale::Matrix(s.h()?),
        })
    }

    fn feed(
        &mut self,
        geometry: Geometry,
        phi: &ParamVector,
        theta_hat: &ParamVector,
        trace: &TaskTrace,
        sigma: f64,
    ) -> Result<()> {
        match self {
            SimState::Scalar(s) => s.observe(geometry.bregman(theta_hat, phi)?, sigma),
            SimState::Isotropic(s) => s.accumulate(phi, theta_hat, trace.grad_sq_total),
            SimState::Diagonal(s) => s.accumulate(phi, theta_hat, &trace.grad_sq),
            SimState::Matrix(s) => s.accumulate(phi, theta_hat, &trace.gradients),
        }
    }
}

/// Runs the meta loop over at most `config.horizon` tasks.
pub fn run_meta_stream<I>(config: &MetaRunConfig, tasks: I) -> std::result::Result<MetaRun, AbortedRun>
where
    I: IntoIterator<Item = Task>,
{
    let mut rows = Vec::new();
    let abort = |task: usize, rows: Vec<LedgerRow>, source: ArubaError| AbortedRun { task, rows, source };
    if let Err(e) = config.validate() {
        return Err(abort(0, rows, e));
    }
    let mut init = match InitState::new(config.dyn_strategy, config.geometry, config.domain.clone(), config.init.clone()) {
        Ok(s) => s,
        Err(e) => return Err(abort(0, rows, e)),
    };
    let mut sim: Option<SimState> = None;
    let mut averages = RunningAverages::new();
    let mut phis = Vec::new();
    let mut scales = Vec::new();
    let mut updates = Vec::new();
    for (index, task) in tasks.into_iter().take(config.horizon).enumerate() {
        let t = index + 1;
        let step = (|| -> Result<(LedgerRow, ParamVector, MetaScale, ParamVector)> {
            if sim.is_none() {
                sim = Some(SimState::new(config, &task)?);
            }
            let sim_state = sim.as_mut().expect("initialized above");
            let phi = init.phi().clone();
            let meta_scale = sim_state.current()?;
            let scale = meta_scale.to_scale(task.lipschitz_rms(), task.m())?;
            let within = WithinTaskConfig::new(config.geometry, config.domain.clone(), phi.clone(), scale.clone(), config.mode)?;
            let trace = run_task(&within, &task)?;
            let theta_hat = config.update.pick(&trace);
            let sigma = task.lipschitz_rms() * (task.m() as f64).sqrt();
            if !(sigma > 0.0) {
                return Err(invalid("task weight G√m must be positive"));
            }
            sim_state.feed(config.geometry, &phi, &theta_hat, &trace, sigma)?;
            let next = init.update(&theta_hat, sigma)?.clone();
            let v = match meta_scale {
                MetaScale::V(v) => Some(v),
                _ => None,
            };
            let bound = if config.sim.is_scalar() { trace.upper_bound } else { trace.upper_bound_observed };
            let row = averages.row(t, trace.regret, bound, trace.upper_bound_observed, v, &scale, next.distance(&phi));
            Ok((row, phi, meta_scale, theta_hat))
        })();
        match step {
            Ok((row, phi, meta_scale, theta_hat)) => {
                rows.push(row);
                phis.push(phi);
                scales.push(meta_scale);
                updates.push(theta_hat);
            }
            Err(e) => return Err(abort(t, rows, e)),
        }
    }
    if rows.is_empty() {
        return Err(abort(0, rows, invalid("the environment produced no tasks")));
    }
    let final_scale = match sim.as_ref().expect("at least one task").current() {
        Ok(s) => s,
        Err(e) => return Err(abort(rows.len(), rows, e)),
    };
    Ok(MetaRun { rows, phis, scales, updates, final_phi: init.phi().clone(), final_scale })
}
