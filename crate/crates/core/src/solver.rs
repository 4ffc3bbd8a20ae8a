//! Constrained minimization of finite sums of losses plus a proximal term.

use nalgebra::{DMatrix, DVector};

use crate::domain::{Domain, DomainKind};
use crate::error::{invalid, ArubaError, Result};
use crate::geometry::{softmax, Geometry};
use crate::loss::{LossFamily, LossOracle};
use crate::param::ParamVector;
use crate::task::Task;

pub const MAX_ITERATIONS: usize = 100_000;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Weight of the divergence term that selects the minimizer nearest the anchor.
pub const TIE_BREAK_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Prox<'a> {
    None,
    /// weight · Breg(θ‖anchor)
    Bregman { geometry: Geometry, anchor: &'a ParamVector, weight: f64 },
    /// ½ Σⱼ qⱼ(θⱼ − anchorⱼ)²
    Diagonal { anchor: &'a ParamVector, q: &'a ParamVector },
    /// ½ (θ − anchor)ᵀ Q (θ − anchor)
    Matrix { anchor: &'a ParamVector, q: &'a DMatrix<f64> },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Objective<'a> {
    pub losses: &'a [LossOracle],
    pub prox: Prox<'a>,
}

impl Objective<'_> {
    fn loss_gradient(&self, theta: &ParamVector) -> ParamVector {
        let mut g = ParamVector::zeros(theta.dim());
        for l in self.losses {
            g.add_assign(&l.gradient(theta));
        }
        g
    }

    /// Gradient for the Euclidean-geometry solver.
    fn gradient(&self, theta: &ParamVector) -> ParamVector {
        let mut g = self.loss_gradient(theta);
        match self.prox {
            Prox::None => {}
            Prox::Bregman { anchor, weight, .. } => g.add_scaled_assign(weight, &theta.sub(anchor)),
            Prox::Diagonal { anchor, q } => g.add_assign(&theta.sub(anchor).hadamard(q)),
            Prox::Matrix { anchor, q } => {
                let d = q * to_dvector(&theta.sub(anchor));
                g.add_assign(&ParamVector::from_vec(d.as_slice().to_vec()));
            }
        }
        g
    }
}

pub(crate) fn to_dvector(v: &ParamVector) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// Minimizer of the objective over the domain.
pub(crate) fn minimize(
    objective: &Objective<'_>,
    domain: &Domain,
    geometry: Geometry,
    start: &ParamVector,
) -> Result<ParamVector> {
    if let Some(x) = closed_form(objective, domain, geometry)? {
        return Ok(x);
    }
    match geometry {
        Geometry::Euclidean => accelerated_projected_gradient(objective, domain, start),
        Geometry::NegativeEntropy => exponentiated_gradient(objective, domain, start),
    }
}

/// Quadratic and linear losses with an isotropic (or separable, or
/// box-compatible matrix) proximal term have an exact minimizer.
fn closed_form(objective: &Objective<'_>, domain: &Domain, geometry: Geometry) -> Result<Option<ParamVector>> {
    if !objective.losses.iter().all(|l| l.is_quadratic_or_linear()) {
        return Ok(None);
    }
    let d = domain.dim();
    let mut weight = 0.0;
    let mut pull = ParamVector::zeros(d);
    for l in objective.losses {
        match l.family() {
            LossFamily::Quadratic { target, weight: w } => {
                weight += w;
                pull.add_scaled_assign(*w, target);
            }
            LossFamily::Linear { gradient } => pull.add_scaled_assign(-1.0, gradient),
            LossFamily::Logistic { .. } => unreachable!(),
        }
    }
    match objective.prox {
        Prox::None | Prox::Bregman { geometry: Geometry::Euclidean, .. } => {
            if let Prox::Bregman { anchor, weight: w, .. } = objective.prox {
                weight += w;
                pull.add_scaled_assign(w, anchor);
            }
            if !(weight > 0.0) {
                return Ok(None);
            }
            let center = pull.scale(1.0 / weight);
            if !center.is_finite() {
                return Ok(None);
            }
            match geometry {
                Geometry::Euclidean => Ok(Some(domain.project(Geometry::Euclidean, &center, None)?)),
                // Euclidean objective on the simplex: Euclidean projection is exact.
                Geometry::NegativeEntropy => {
                    geometry.check_domain(domain)?;
                    Ok(Some(domain.project(Geometry::Euclidean, &center, None)?))
                }
            }
        }
        Prox::Bregman { geometry: Geometry::NegativeEntropy, anchor, weight: w } => {
            if weight != 0.0 || !(w > 0.0) {
                return Ok(None);
            }
            geometry.check_domain(domain)?;
            // argmin ⟨G,θ⟩ + w·KL(θ‖anchor) over the simplex
            let logits: Vec<f64> = anchor
                .iter()
                .zip(pull.iter())
                .map(|(&a, &p)| if a > 0.0 { a.ln() + p / w } else { f64::NEG_INFINITY })
                .collect();
            Ok(Some(softmax(&logits)))
        }
        Prox::Diagonal { anchor, q } => {
            let diag = q.map(|qj| qj + weight);
            let numer = pull.add(&anchor.hadamard(q));
            let center = ParamVector::from_vec(
                numer.iter().zip(diag.iter()).map(|(n, h)| n / h).collect(),
            );
            match domain.kind() {
                DomainKind::Simplex { .. } => Ok(None),
                _ => {
                    let inv = diag.map(|h| 1.0 / h);
                    Ok(Some(domain.project(Geometry::Euclidean, &center, Some(&inv))?))
                }
            }
        }
        Prox::Matrix { anchor, q } => {
            if !matches!(domain.kind(), DomainKind::Box { .. } | DomainKind::Unconstrained { .. }) {
                return Ok(None);
            }
            let hess = q + DMatrix::identity(d, d) * weight;
            let rhs = to_dvector(&pull) + q * to_dvector(anchor);
            let chol = hess
                .clone()
                .cholesky()
                .ok_or_else(|| invalid("proximal metric is not positive definite"))?;
            let center = chol.solve(&rhs);
            let center = ParamVector::new(center.as_slice().to_vec())?;
            Ok(Some(domain.project_quadratic(&center, &hess)?))
        }
    }
}

/// FISTA with gradient-based restart. The step is accepted when the local
/// gradient Lipschitz estimate is below its inverse.
fn accelerated_projected_gradient(
    objective: &Objective<'_>,
    domain: &Domain,
    start: &ParamVector,
) -> Result<ParamVector> {
    let project = |x: &ParamVector| domain.project(Geometry::Euclidean, x, None);
    let mut x = project(start)?;
    let mut gx = objective.gradient(&x);
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut step = 1.0f64;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        residual = x.distance(&project(&x.sub(&gx))?);
        if residual <= RESIDUAL_TOLERANCE {
            return Ok(x);
        }
        let gy = objective.gradient(&y);
        let (next, g_next) = loop {
            let candidate = project(&y.axpy(-step, &gy))?;
            let g_cand = objective.gradient(&candidate);
            let moved = candidate.distance(&y);
            if moved == 0.0 || g_cand.distance(&gy) * step <= moved {
                break (candidate, g_cand);
            }
            step *= 0.5;
            if step < 1e-300 {
                return Err(ArubaError::Numeric("step size underflow in gradient solver".into()));
            }
        };
        let restart = gy.dot(&next.sub(&x)) > 0.0;
        if restart {
            momentum = 1.0;
            y = next.clone();
        } else {
            let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / m_next;
            y = next.axpy(beta, &next.sub(&x));
            y = project(&y)?;
            momentum = m_next;
        }
        x = next;
        gx = g_next;
        step *= 1.5;
    }
    Err(ArubaError::Convergence { iterations: MAX_ITERATIONS, residual })
}

/// Exponentiated gradient on the simplex, iterating on log-weights so that
/// vanishing coordinates never underflow to an invalid state.
fn exponentiated_gradient(
    objective: &Objective<'_>,
    domain: &Domain,
    start: &ParamVector,
) -> Result<ParamVector> {
    Geometry::NegativeEntropy.check_domain(domain)?;
    let mut logits: Vec<f64> = start.iter().map(|&s| s.max(1e-300).ln()).collect();
    let grad = |logits: &[f64]| -> (ParamVector, ParamVector) {
        let x = softmax(logits);
        let mut g = objective.loss_gradient(&x).into_vec();
        if let Prox::Bregman { anchor, weight, .. } = objective.prox {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += weight * (logits[j] - log_z - anchor[j].ln());
            }
        }
        (x, ParamVector::from_vec(g))
    };
    let mut step = 1.0f64;
    let mut residual = f64::INFINITY;
    let (mut x, mut g) = grad(&logits);
    for _ in 0..MAX_ITERATIONS {
        residual = x.distance(&domain.project(Geometry::Euclidean, &x.sub(&g), None)?);
        if residual <= RESIDUAL_TOLERANCE {
            return Ok(x);
        }
        loop {
            let cand: Vec<f64> = logits.iter().zip(g.iter()).map(|(l, gj)| l - step * gj).collect();
            let (xc, gc) = grad(&cand);
            let curvature = gc.sub(&g).dot(&xc.sub(&x));
            let sym_kl: f64 = xc
                .iter()
                .zip(x.iter())
                .map(|(&a, &b)| (a - b) * (safe_ln(a) - safe_ln(b)))
                .sum();
            if curvature * step <= sym_kl || xc.distance(&x) == 0.0 {
                logits = cand;
                x = xc;
                g = gc;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Err(ArubaError::Numeric("step size underflow in entropy solver".into()));
            }
        }
        step *= 1.5;
    }
    Err(ArubaError::Convergence { iterations: MAX_ITERATIONS, residual })
}

fn safe_ln(x: f64) -> f64 {
    x.max(1e-300).ln()
}

/// θ* = argmin Σᵢ ℓᵢ(θ) over the domain; ties broken towards `anchor` in
/// divergence.
pub fn hindsight_optimum(
    task: &Task,
    domain: &Domain,
    geometry: Geometry,
    anchor: &ParamVector,
) -> Result<ParamVector> {
    geometry.check_domain(domain)?;
    anchor.same_dim(&domain.center())?;
    let strictly_convex_quadratic = task.losses().iter().all(|l| l.is_quadratic_or_linear())
        && task.losses().iter().any(|l| match l.family() {
            LossFamily::Quadratic { weight, .. } => *weight > 0.0,
            _ => false,
        });
    let prox = if strictly_convex_quadratic {
        Prox::None
    } else {
        Prox::Bregman { geometry, anchor, weight: TIE_BREAK_WEIGHT }
    };
    let objective = Objective { losses: task.losses(), prox };
    let x = minimize(&objective, domain, geometry, anchor)?;
    if matches!(prox, Prox::None) {
        return Ok(x);
    }
    // The divergence term shifts a strictly convex optimum by O(weight);
    // polishing without it removes the shift and cannot move along flat
    // directions, so the tie-break survives.
    let plain = Objective { losses: task.losses(), prox: Prox::None };
    match geometry {
        Geometry::Euclidean => accelerated_projected_gradient(&plain, domain, &x),
        Geometry::NegativeEntropy => exponentiated_gradient(&plain, domain, &x),
    }
}

/// ‖θ − Π(θ − ∇Σℓ(θ))‖, the stationarity measure used as a stopping rule.
pub fn projected_gradient_residual(task: &Task, domain: &Domain, theta: &ParamVector) -> Result<f64> {
    let g = task.total_gradient(theta);
    Ok(theta.distance(&domain.project(Geometry::Euclidean, &theta.sub(&g), None)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_optimum_is_mean_of_targets() {
        let domain = Domain::unconstrained(2).unwrap();
        let losses = vec![
            LossOracle::quadratic(pv(&[0.0, 0.0]), 1.0).unwrap(),
            LossOracle::quadratic(pv(&[2.0, 2.0]), 1.0).unwrap(),
        ];
        let task = Task::new(losses, &Domain::cube(2, 3.0).unwrap()).unwrap();
        let x = hindsight_optimum(&task, &domain, Geometry::Euclidean, &pv(&[0.0, 0.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn linear_optimum_is_a_vertex() {
        let domain = Domain::cube(2, 1.0).unwrap();
        let task = Task::new(vec![LossOracle::linear(pv(&[1.0, -1.0]))], &domain).unwrap();
        let x = hindsight_optimum(&task, &domain, Geometry::Euclidean, &domain.center()).unwrap();
        assert_eq!(x.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn flat_direction_resolved_towards_anchor() {
        let domain = Domain::cube(2, 1.0).unwrap();
        let task = Task::new(vec![LossOracle::linear(pv(&[1.0, 0.0]))], &domain).unwrap();
        let x = hindsight_optimum(&task, &domain, Geometry::Euclidean, &pv(&[0.5, 0.3])).unwrap();
        assert_eq!(x[0], -1.0);
        assert!((x[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn entropy_linear_optimum_concentrates_on_best_expert() {
        let domain = Domain::simplex(3).unwrap();
        let task = Task::new(vec![LossOracle::linear(pv(&[0.3, 0.1, 0.2]))], &domain).unwrap();
        let x = hindsight_optimum(&task, &domain, Geometry::NegativeEntropy, &domain.center()).unwrap();
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_optimum_is_stationary() {
        let domain = Domain::ball_at_origin(2, 5.0).unwrap();
        let losses = vec![
            LossOracle::logistic(pv(&[1.0, 0.5]), 1.0).unwrap(),
            LossOracle::logistic(pv(&[-0.3, 1.0]), -1.0).unwrap(),
            LossOracle::logistic(pv(&[0.8, -0.6]), -1.0).unwrap(),
        ];
        let task = Task::new(losses, &domain).unwrap();
        let x = hindsight_optimum(&task, &domain, Geometry::Euclidean, &domain.center()).unwrap();
        assert!(projected_gradient_residual(&task, &domain, &x).unwrap() < 1e-9);
    }

    #[test]
    fn entropy_solver_handles_logistic_on_simplex() {
        let domain = Domain::simplex(3).unwrap();
        let losses = vec![
            LossOracle::logistic(pv(&[1.0, -0.5, 0.2]), 1.0).unwrap(),
            LossOracle::logistic(pv(&[0.3, 0.9, -1.0]), -1.0).unwrap(),
        ];
        let task = Task::new(losses, &domain).unwrap();
        let x = hindsight_optimum(&task, &domain, Geometry::NegativeEntropy, &domain.center()).unwrap();
        assert!(domain.contains(&x, 1e-12));
        assert!(projected_gradient_residual(&task, &domain, &x).unwrap() < 1e-8);
    }
}
