//! Within-task learners: lazy linearized mirror descent and full FTRL,
//! parameterized by an initialization and a scalar, per-coordinate or
//! full-matrix scale.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainKind};
use crate::error::{invalid, ArubaError, Result};
use crate::geometry::Geometry;
use crate::linalg::{is_symmetric, min_eigenvalue, spd_power};
use crate::param::ParamVector;
use crate::solver::{hindsight_optimum, minimize, to_dvector, Objective, Prox};
use crate::task::Task;

#[derive(Debug, Clone, PartialEq)]
pub enum Scale {
    Scalar(f64),
    Diagonal(ParamVector),
    Matrix(DMatrix<f64>),
}

impl Scale {
    /// (min, mean, max) of the per-coordinate rates (eigenvalues for a matrix).
    pub fn summary(&self) -> (f64, f64, f64) {
        match self {
            Scale::Scalar(eta) => (*eta, *eta, *eta),
            Scale::Diagonal(eta) => (eta.min(), eta.mean(), eta.max()),
            Scale::Matrix(h) => {
                let eig = nalgebra::SymmetricEigen::new(h.clone()).eigenvalues;
                (eig.min(), eig.mean(), eig.max())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Lazy linearized online mirror descent.
    #[default]
    OmdLinearized,
    /// Follow-the-regularized-leader on the full losses.
    FtrlFull,
}

#[derive(Debug, Clone)]
pub struct WithinTaskConfig {
    geometry: Geometry,
    domain: Domain,
    init: ParamVector,
    scale: Scale,
    mode: Mode,
    inverse: Option<DMatrix<f64>>,
}

impl WithinTaskConfig {
    pub fn new(geometry: Geometry, domain: Domain, init: ParamVector, scale: Scale, mode: Mode) -> Result<Self> {
        let bad = |msg: String| Err(ArubaError::InvalidConfig(msg));
        geometry.check_domain(&domain).map_err(|e| ArubaError::InvalidConfig(e.to_string()))?;
        if init.dim() != domain.dim() {
            return bad(format!("initialization has dimension {}, domain has {}", init.dim(), domain.dim()));
        }
        if !domain.contains(&init, 1e-9) {
            return bad("initialization lies outside the domain".into());
        }
        let mut inverse = None;
        match &scale {
            Scale::Scalar(eta) => {
                if !(*eta > 0.0) || !eta.is_finite() {
                    return bad(format!("learning rate must be positive and finite, got {eta}"));
                }
            }
            Scale::Diagonal(eta) => {
                if eta.dim() != domain.dim() {
                    return bad("per-coordinate rate has the wrong dimension".into());
                }
                if eta.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                    return bad("per-coordinate rates must be positive and finite".into());
                }
                if geometry != Geometry::Euclidean {
                    return bad("per-coordinate rates require the Euclidean geometry".into());
                }
                if matches!(domain.kind(), DomainKind::Simplex { .. }) {
                    return bad("per-coordinate rates are not supported on the simplex".into());
                }
            }
            Scale::Matrix(h) => {
                let d = domain.dim();
                if h.nrows() != d || h.ncols() != d {
                    return bad("matrix scale has the wrong shape".into());
                }
                if geometry != Geometry::Euclidean {
                    return bad("matrix scales require the Euclidean geometry".into());
                }
                if !matches!(domain.kind(), DomainKind::Box { .. } | DomainKind::Unconstrained { .. }) {
                    return bad("matrix scales need a box or unconstrained domain".into());
                }
                if !is_symmetric(h, 1e-10) {
                    return bad("matrix scale is not symmetric".into());
                }
                if !(min_eigenvalue(h) > 0.0) {
                    return bad("matrix scale is not positive definite".into());
                }
                inverse = Some(spd_power(h, -1.0).map_err(|e| ArubaError::InvalidConfig(e.to_string()))?);
            }
        }
        let init = domain.project(geometry, &init, None)?;
        Ok(Self { geometry, domain, init, scale, mode, inverse })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn init(&self) -> &ParamVector {
        &self.init
    }

    pub fn scale(&self) -> &Scale {
        &self.scale
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn prox(&self) -> Prox<'_> {
        match &self.scale {
            Scale::Scalar(eta) => Prox::Bregman { geometry: self.geometry, anchor: &self.init, weight: 1.0 / eta },
            Scale::Diagonal(eta) => Prox::Diagonal { anchor: &self.init, q: eta },
            Scale::Matrix(_) => Prox::Matrix {
                anchor: &self.init,
                q: self.inverse.as_ref().expect("inverse cached for matrix scales"),
            },
        }
    }
}

/// argmin_θ Breg(θ‖φ) + η⟨Σ∇, θ⟩, or ½‖θ − φ‖²_{H⁻¹} + ⟨Σ∇, θ⟩ for
/// per-coordinate or matrix scales.
pub fn omd_iterate(config: &WithinTaskConfig, gradient_sum: &ParamVector) -> Result<ParamVector> {
    config.init.same_dim(gradient_sum)?;
    let phi = &config.init;
    match &config.scale {
        Scale::Scalar(eta) => config.geometry.mirror_step(&config.domain, phi, *eta, gradient_sum),
        Scale::Diagonal(eta) => {
            let y = phi.sub(&eta.hadamard(gradient_sum));
            config.domain.project(Geometry::Euclidean, &y, Some(eta))
        }
        Scale::Matrix(h) => {
            let step = h * to_dvector(gradient_sum);
            let y = ParamVector::new(phi.iter().zip(step.iter()).map(|(p, s)| p - s).collect())?;
            let inverse = config.inverse.as_ref().expect("inverse cached for matrix scales");
            config.domain.project_quadratic(&y, inverse)
        }
    }
}

/// Per-task record of a within-task run.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTrace {
    pub iterates: Vec<ParamVector>,
    pub gradients: Vec<ParamVector>,
    pub losses: Vec<f64>,
    pub hindsight: ParamVector,
    /// θ_{m+1}, the action the learner would take next.
    pub final_iterate: ParamVector,
    pub regret: f64,
    /// Upper bound using the declared Lipschitz constant (scalar scales) or
    /// the observed gradients (per-coordinate and matrix scales).
    pub upper_bound: f64,
    /// Upper bound using the observed gradients.
    pub upper_bound_observed: f64,
    pub grad_sq: ParamVector,
    pub grad_sq_total: f64,
}

impl TaskTrace {
    pub fn average_iterate(&self) -> ParamVector {
        ParamVector::mean_of(&self.iterates).expect("a trace has at least one iterate")
    }

    pub fn m(&self) -> usize {
        self.iterates.len()
    }
}

pub fn run_task(config: &WithinTaskConfig, task: &Task) -> Result<TaskTrace> {
    let d = config.domain.dim();
    if task.dim() != d {
        return Err(invalid(format!("task has dimension {}, learner has {d}", task.dim())));
    }
    let m = task.m();
    let all_linear = task.losses().iter().all(|l| l.is_linear());
    let lazy = config.mode == Mode::OmdLinearized || all_linear;
    let mut iterates = Vec::with_capacity(m);
    let mut gradients = Vec::with_capacity(m);
    let mut losses = Vec::with_capacity(m);
    let mut gradient_sum = ParamVector::zeros(d);
    let mut grad_sq = ParamVector::zeros(d);
    let mut previous = config.init.clone();
    let play = |i: usize, gradient_sum: &ParamVector, previous: &ParamVector| -> Result<ParamVector> {
        if lazy {
            omd_iterate(config, gradient_sum)
        } else {
            let objective = Objective { losses: &task.losses()[..i], prox: config.prox() };
            minimize(&objective, &config.domain, config.geometry, previous)
        }
    };
    for (i, loss) in task.losses().iter().enumerate() {
        let theta = play(i, &gradient_sum, &previous)?;
        let grad = loss.gradient(&theta);
        losses.push(loss.value(&theta));
        gradient_sum.add_assign(&grad);
        grad_sq.add_assign(&grad.squared());
        gradients.push(grad);
        previous = theta.clone();
        iterates.push(theta);
    }
    let final_iterate = play(m, &gradient_sum, &previous)?;
    let hindsight = hindsight_optimum(task, &config.domain, config.geometry, &config.init)?;
    let regret = losses.iter().sum::<f64>() - task.total_value(&hindsight);
    let upper_bound_observed = regret_upper_bound(
        config.geometry,
        &config.init,
        &config.scale,
        &hindsight,
        GradientInfo::Observed(&gradients),
    )?;
    let upper_bound = match config.scale {
        Scale::Scalar(_) => regret_upper_bound(
            config.geometry,
            &config.init,
            &config.scale,
            &hindsight,
            GradientInfo::Declared { lipschitz: task.lipschitz_rms(), m },
        )?,
        _ => upper_bound_observed,
    };
    let grad_sq_total = grad_sq.iter().sum();
    Ok(TaskTrace {
        iterates,
        gradients,
        losses,
        hindsight,
        final_iterate,
        regret,
        upper_bound,
        upper_bound_observed,
        grad_sq,
        grad_sq_total,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum GradientInfo<'a> {
    /// Root-mean-square Lipschitz constant and task length.
    Declared { lipschitz: f64, m: usize },
    Observed(&'a [ParamVector]),
}

/// Breg(θ*‖φ)/η + η·Σ‖∇‖²_* for a scalar rate, or
/// ½‖θ* − φ‖²_{H⁻¹} + Σ‖∇‖²_H for per-coordinate and matrix scales.
pub fn regret_upper_bound(
    geometry: Geometry,
    phi: &ParamVector,
    scale: &Scale,
    theta_star: &ParamVector,
    gradients: GradientInfo<'_>,
) -> Result<f64> {
    phi.same_dim(theta_star)?;
    match scale {
        Scale::Scalar(eta) => {
            if !(*eta > 0.0) || !eta.is_finite() {
                return Err(invalid(format!("learning rate must be positive, got {eta}")));
            }
            let divergence = geometry.bregman(theta_star, phi)?;
            let grad_term = match gradients {
                GradientInfo::Declared { lipschitz, m } => lipschitz * lipschitz * m as f64,
                GradientInfo::Observed(grads) => grads.iter().map(|g| geometry.dual_norm(g).powi(2)).sum(),
            };
            Ok(divergence / eta + eta * grad_term)
        }
        Scale::Diagonal(eta) => {
            if eta.iter().any(|&e| !(e > 0.0)) {
                return Err(invalid("per-coordinate rates must be positive"));
            }
            let grads = observed(gradients)?;
            let diff = theta_star.sub(phi);
            let distance: f64 = diff.iter().zip(eta.iter()).map(|(d, e)| d * d / e).sum();
            let grad_term: f64 = grads.iter().map(|g| g.squared().dot(eta)).sum();
            Ok(0.5 * distance + grad_term)
        }
        Scale::Matrix(h) => {
            let inverse = spd_power(h, -1.0)?;
            let grads = observed(gradients)?;
            let diff = to_dvector(&theta_star.sub(phi));
            let distance = diff.dot(&(&inverse * &diff));
            let grad_term: f64 = grads
                .iter()
                .map(|g| {
                    let v = to_dvector(g);
                    v.dot(&(h * &v))
                })
                .sum();
            Ok(0.5 * distance + grad_term)
        }
    }
}

fn observed<'a>(info: GradientInfo<'a>) -> Result<&'a [ParamVector]> {
    match info {
        GradientInfo::Observed(g) => Ok(g),
        GradientInfo::Declared { .. } => Err(ArubaError::Unsupported(
            "per-coordinate and matrix bounds need the observed gradients".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossOracle;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn scalar(domain: Domain, init: &[f64], eta: f64) -> WithinTaskConfig {
        WithinTaskConfig::new(Geometry::Euclidean, domain, pv(init), Scale::Scalar(eta), Mode::OmdLinearized).unwrap()
    }

    #[test]
    fn omd_closed_form_steps() {
        let cfg = scalar(Domain::unconstrained(2).unwrap(), &[0.0, 0.0], 0.1);
        let x = omd_iterate(&cfg, &pv(&[1.0, -2.0])).unwrap();
        assert!((x[0] + 0.1).abs() < 1e-15 && (x[1] - 0.2).abs() < 1e-15);
        assert_eq!(omd_iterate(&cfg, &pv(&[0.0, 0.0])).unwrap(), pv(&[0.0, 0.0]));

        let diag = WithinTaskConfig::new(
            Geometry::Euclidean,
            Domain::cube(2, 1.0).unwrap(),
            pv(&[0.0, 0.0]),
            Scale::Diagonal(pv(&[1.0, 0.01])),
            Mode::OmdLinearized,
        )
        .unwrap();
        let x = omd_iterate(&diag, &pv(&[1.0, 1.0])).unwrap();
        assert_eq!(x.as_slice(), &[-1.0, -0.01]);
    }

    #[test]
    fn two_step_quadratic_task() {
        let unconstrained = Domain::unconstrained(2).unwrap();
        let box_domain = Domain::cube(2, 5.0).unwrap();
        let loss = LossOracle::quadratic(pv(&[1.0, 0.0]), 1.0).unwrap();
        let task = Task::new(vec![loss.clone(), loss], &box_domain).unwrap();
        let trace = run_task(&scalar(unconstrained, &[0.0, 0.0], 1.0), &task).unwrap();
        assert_eq!(trace.iterates, vec![pv(&[0.0, 0.0]), pv(&[1.0, 0.0])]);
        assert_eq!(trace.hindsight, pv(&[1.0, 0.0]));
        assert!((trace.regret - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_losses_have_zero_regret() {
        let domain = Domain::cube(3, 1.0).unwrap();
        let task = Task::new(vec![LossOracle::linear(ParamVector::zeros(3)); 4], &domain).unwrap();
        let trace = run_task(&scalar(domain, &[0.2, 0.0, -0.1], 0.3), &task).unwrap();
        assert_eq!(trace.regret, 0.0);
        assert!(trace.iterates.iter().all(|x| x == &pv(&[0.2, 0.0, -0.1])));
    }

    #[test]
    fn bound_arithmetic() {
        let g = Geometry::Euclidean;
        let u = regret_upper_bound(
            g,
            &pv(&[0.0]),
            &Scale::Scalar(0.5),
            &pv(&[1.0]),
            GradientInfo::Declared { lipschitz: 1.0, m: 4 },
        )
        .unwrap();
        assert_eq!(u, 3.0);
        let u = regret_upper_bound(
            g,
            &pv(&[0.3]),
            &Scale::Scalar(0.7),
            &pv(&[0.3]),
            GradientInfo::Declared { lipschitz: 2.0, m: 3 },
        )
        .unwrap();
        assert!((u - 0.7 * 12.0).abs() < 1e-12);
        let grads = [pv(&[1.0]), pv(&[1.0])];
        let u = regret_upper_bound(
            g,
            &pv(&[0.0]),
            &Scale::Diagonal(pv(&[2.0])),
            &pv(&[2.0]),
            GradientInfo::Observed(&grads),
        )
        .unwrap();
        assert_eq!(u, 5.0);
        assert!(regret_upper_bound(
            g,
            &pv(&[0.0]),
            &Scale::Scalar(0.0),
            &pv(&[1.0]),
            GradientInfo::Declared { lipschitz: 1.0, m: 1 }
        )
        .is_err());
    }

    #[test]
    fn matrix_scale_rejected_on_ball() {
        let err = WithinTaskConfig::new(
            Geometry::Euclidean,
            Domain::ball_at_origin(2, 1.0).unwrap(),
            pv(&[0.0, 0.0]),
            Scale::Matrix(DMatrix::identity(2, 2)),
            Mode::OmdLinearized,
        )
        .unwrap_err();
        assert!(matches!(err, ArubaError::InvalidConfig(_)));
        let err = WithinTaskConfig::new(
            Geometry::Euclidean,
            Domain::cube(2, 1.0).unwrap(),
            pv(&[0.0, 0.0]),
            Scale::Matrix(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])),
            Mode::OmdLinearized,
        )
        .unwrap_err();
        assert!(matches!(err, ArubaError::InvalidConfig(_)));
    }
}
