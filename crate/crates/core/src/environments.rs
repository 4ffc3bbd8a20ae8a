//! Synthetic task streams with controlled task similarity.
//!
//! Every task is built around a center θᶜ. Quadratic tasks use losses
//! (w/2)‖θ − aᵢ‖² whose targets average exactly to θᶜ, so θᶜ is the task's
//! optimum in hindsight. Logistic tasks draw labels from a model with
//! parameter θᶜ.

use rand::Rng as _;
use rand_distr::{Bernoulli, Distribution};
use serde::{Deserialize, Serialize};

use crate::domain::{random_direction, Domain, DomainKind};
use crate::error::{ArubaError, Result};
use crate::loss::{sigmoid, LossOracle};
use crate::param::ParamVector;
use crate::rng::{Rng, SeedStream};
use crate::task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Quadratic,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum DriftSchedule {
    /// Equal-length phases, each with its own reference point.
    Phases { points: Vec<ParamVector> },
    /// Reference point moves by `step` in a uniformly random direction per task.
    RandomWalk { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvKind {
    Static { deviation: f64 },
    Dynamic { schedule: DriftSchedule, deviation: f64 },
    /// Centers φ* + R·diag(spread)·u with E[uⱼ²] = 1; R rotates coordinates
    /// 1 and 2 by 45° when `rotate` is set.
    Geometry { spread: ParamVector, rotate: bool },
    Distributional { dispersion: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub dim: usize,
    /// Losses per task.
    pub m: usize,
    /// Number of tasks.
    pub tasks: usize,
    pub family: LossKind,
    pub domain: Domain,
    /// Declared Lipschitz constant of every loss.
    pub lipschitz: f64,
    /// Within-task spread of the quadratic targets around the task center.
    pub noise: f64,
    /// φ*; defaults to a point offset from the domain center.
    pub center: Option<ParamVector>,
    pub seed: u64,
}

fn spec_error(msg: impl Into<String>) -> ArubaError {
    ArubaError::InvalidSpec(msg.into())
}

/// Generated tasks with the centers they were built around.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
    pub centers: Vec<ParamVector>,
    /// Reference sequence ψ for drifting environments.
    pub reference: Vec<ParamVector>,
    /// Σ‖ψ_t − ψ_{t−1}‖₂
    pub path_length: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.m == 0 || self.tasks == 0 {
            return Err(spec_error("dim, m and tasks must all be at least 1"));
        }
        if self.domain.dim() != self.dim {
            return Err(spec_error("domain dimension does not match dim"));
        }
        if !matches!(self.domain.kind(), DomainKind::Ball { .. } | DomainKind::Box { .. }) {
            return Err(spec_error("environments need a ball or box domain"));
        }
        if !(self.lipschitz > 0.0) || !self.lipschitz.is_finite() {
            return Err(spec_error("Lipschitz bound must be positive"));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(spec_error("noise must be nonnegative"));
        }
        if let Some(c) = &self.center {
            if c.dim() != self.dim {
                return Err(spec_error("center has the wrong dimension"));
            }
        }
        match &self.kind {
            EnvKind::Static { deviation } | EnvKind::Dynamic { deviation, .. } => {
                if !(*deviation >= 0.0) || !deviation.is_finite() {
                    return Err(spec_error("deviation must be nonnegative"));
                }
            }
            EnvKind::Geometry { spread, rotate } => {
                if spread.dim() != self.dim || spread.iter().any(|&s| s < 0.0) {
                    return Err(spec_error("spread must be a nonnegative vector of length dim"));
                }
                if *rotate && self.dim < 2 {
                    return Err(spec_error("rotation needs at least two coordinates"));
                }
            }
            EnvKind::Distributional { dispersion } => {
                if !(*dispersion >= 0.0) || !dispersion.is_finite() {
                    return Err(spec_error("dispersion must be nonnegative"));
                }
            }
        }
        if let EnvKind::Dynamic { schedule: DriftSchedule::Phases { points }, .. } = &self.kind {
            if points.is_empty() || points.iter().any(|p| p.dim() != self.dim) {
                return Err(spec_error("phases need at least one point of dimension dim"));
            }
        }
        if let EnvKind::Dynamic { schedule: DriftSchedule::RandomWalk { step }, .. } = &self.kind {
            if !(*step >= 0.0) || !step.is_finite() {
                return Err(spec_error("random-walk step must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Weight w = G/diam so that every gradient w(θ − a) has norm ≤ G.
    pub fn quadratic_weight(&self) -> f64 {
        self.lipschitz / self.domain.diameter_l2()
    }

    /// Largest deviation from the domain center that any task center may have.
    fn slack(&self, margin: f64) -> f64 {
        match self.domain.kind() {
            DomainKind::Ball { radius, .. } => radius - margin,
            DomainKind::Box { lo, hi } => {
                lo.iter().zip(hi.iter()).map(|(l, h)| 0.5 * (h - l)).fold(f64::INFINITY, f64::min) - margin
            }
            _ => unreachable!("validated"),
        }
    }

    fn target_margin(&self) -> f64 {
        match self.family {
            LossKind::Quadratic => 2.0 * self.noise,
            LossKind::Logistic => 0.0,
        }
    }

    /// Whether `point` is at least `margin` inside the domain.
    fn inside(&self, point: &ParamVector, margin: f64) -> bool {
        match self.domain.kind() {
            DomainKind::Ball { center, radius } => point.distance(center) + margin <= *radius + 1e-12,
            DomainKind::Box { lo, hi } => point
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(&x, (&l, &h))| x - margin >= l - 1e-12 && x + margin <= h + 1e-12),
            _ => unreachable!("validated"),
        }
    }

    /// Clips into the domain shrunk by `margin`.
    fn clip_inside(&self, point: &ParamVector, margin: f64) -> ParamVector {
        match self.domain.kind() {
            DomainKind::Ball { center, radius } => {
                let offset = point.sub(center);
                let limit = (radius - margin).max(0.0);
                let n = offset.norm();
                if n <= limit {
                    point.clone()
                } else {
                    center.axpy(limit / n, &offset)
                }
            }
            DomainKind::Box { lo, hi } => ParamVector::from_vec(
                point
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(&x, (&l, &h))| {
                        let (a, b) = (l + margin, h - margin);
                        if a <= b {
                            x.clamp(a, b)
                        } else {
                            0.5 * (l + h)
                        }
                    })
                    .collect(),
            ),
            _ => unreachable!("validated"),
        }
    }

    /// φ*, the point task centers scatter around.
    pub fn reference_center(&self) -> Result<ParamVector> {
        if let Some(c) = &self.center {
            return Ok(c.clone());
        }
        let spread = match &self.kind {
            EnvKind::Static { deviation } | EnvKind::Dynamic { deviation, .. } => *deviation,
            EnvKind::Distributional { dispersion } => dispersion + self.noise,
            EnvKind::Geometry { .. } => 0.0,
        };
        let free = self.slack(self.target_margin() + spread);
        if free < 0.0 {
            return Err(spec_error("task deviation is too large for the domain"));
        }
        let d = self.dim as f64;
        let offset: Vec<f64> = (0..self.dim)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * 0.5 * free / d.sqrt())
            .collect();
        Ok(self.domain.center().add(&ParamVector::from_vec(offset)))
    }

    fn tasks_seed(&self) -> SeedStream {
        SeedStream::new(self.seed).named("tasks")
    }

    /// A task around `center`, built from `rng`.
    pub fn task_around(&self, center: &ParamVector, rng: &mut Rng) -> Result<Task> {
        let losses = match self.family {
            LossKind::Quadratic => {
                let w = self.quadratic_weight();
                let raw: Vec<ParamVector> = (0..self.m).map(|_| random_in_ball(rng, self.dim)).collect();
                let mean = ParamVector::mean_of(&raw)?;
                raw.iter()
                    .map(|z| LossOracle::quadratic(center.axpy(self.noise, &z.sub(&mean)), w))
                    .collect::<Result<Vec<_>>>()?
            }
            LossKind::Logistic => self.logistic_losses(center, self.m, rng)?,
        };
        Task::with_lipschitz(losses, self.lipschitz, &self.domain)
    }

    fn logistic_losses(&self, center: &ParamVector, n: usize, rng: &mut Rng) -> Result<Vec<LossOracle>> {
        (0..n)
            .map(|_| {
                let x = random_direction(rng, self.dim).scale(self.lipschitz);
                let p = sigmoid(x.dot(center));
                let positive = Bernoulli::new(p).expect("probability in [0, 1]").sample(rng);
                LossOracle::logistic(x, if positive { 1.0 } else { -1.0 })
            })
            .collect()
    }

    fn stream_from_centers(&self, centers: Vec<ParamVector>) -> Result<Vec<Task>> {
        let seeds = self.tasks_seed();
        centers
            .iter()
            .enumerate()
            .map(|(t, c)| {
                let mut rng = seeds.child(t as u64).named("losses").rng();
                self.task_around(c, &mut rng)
            })
            .collect()
    }

    fn direction(&self, t: usize) -> ParamVector {
        let mut rng = self.tasks_seed().child(t as u64).named("center").rng();
        random_direction(&mut rng, self.dim)
    }
}

/// Uniform sample from the unit ball.
fn random_in_ball(rng: &mut Rng, dim: usize) -> ParamVector {
    let r = rng.random::<f64>().powf(1.0 / dim as f64);
    random_direction(rng, dim).scale(r)
}

fn centers_around(spec: &EnvSpec, reference: &[ParamVector], deviation: f64) -> Result<Vec<ParamVector>> {
    let margin = spec.target_margin() + deviation;
    reference
        .iter()
        .enumerate()
        .map(|(t, psi)| {
            if !spec.inside(psi, margin) {
                return Err(spec_error(format!(
                    "task {t}: reference point plus deviation leaves the domain"
                )));
            }
            Ok(psi.axpy(deviation, &spec.direction(t)))
        })
        .collect()
}

pub fn gen_static(spec: &EnvSpec) -> Result<TaskStream> {
    spec.validate()?;
    let EnvKind::Static { deviation } = spec.kind else {
        return Err(spec_error("gen_static needs a static environment"));
    };
    let phi_star = spec.reference_center()?;
    let reference = vec![phi_star; spec.tasks];
    let centers = centers_around(spec, &reference, deviation)?;
    let tasks = spec.stream_from_centers(centers.clone())?;
    Ok(TaskStream { tasks, centers, reference, path_length: 0.0 })
}

pub fn gen_dynamic(spec: &EnvSpec) -> Result<TaskStream> {
    spec.validate()?;
    let EnvKind::Dynamic { schedule, deviation } = &spec.kind else {
        return Err(spec_error("gen_dynamic needs a dynamic environment"));
    };
    let reference: Vec<ParamVector> = match schedule {
        DriftSchedule::Phases { points } => {
            let phases = points.len();
            (0..spec.tasks).map(|t| points[t * phases / spec.tasks].clone()).collect()
        }
        DriftSchedule::RandomWalk { step } => {
            let mut rng = SeedStream::new(spec.seed).named("walk").rng();
            let mut psi = spec.reference_center()?;
            let mut out = Vec::with_capacity(spec.tasks);
            for t in 0..spec.tasks {
                if t > 0 {
                    psi = psi.axpy(*step, &random_direction(&mut rng, spec.dim));
                }
                out.push(psi.clone());
            }
            out
        }
    };
    let path_length = reference.windows(2).map(|w| w[1].distance(&w[0])).sum();
    let centers = centers_around(spec, &reference, *deviation)?;
    let tasks = spec.stream_from_centers(centers.clone())?;
    Ok(TaskStream { tasks, centers, reference, path_length })
}

/// 45° rotation of coordinates 1 and 2.
fn rotate45(v: &ParamVector) -> ParamVector {
    let mut c = v.as_slice().to_vec();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = (c[0], c[1]);
    c[0] = s * (a - b);
    c[1] = s * (a + b);
    ParamVector::from_vec(c)
}

pub fn gen_geometry(spec: &EnvSpec) -> Result<TaskStream> {
    spec.validate()?;
    let EnvKind::Geometry { spread, rotate } = &spec.kind else {
        return Err(spec_error("gen_geometry needs a geometry environment"));
    };
    let phi_star = spec.reference_center()?;
    let margin = spec.target_margin();
    if !spec.inside(&phi_star, margin) {
        return Err(spec_error("center is too close to the boundary"));
    }
    let root_d = (spec.dim as f64).sqrt();
    let centers: Vec<ParamVector> = (0..spec.tasks)
        .map(|t| {
            let u = spec.direction(t).scale(root_d);
            let mut offset = u.hadamard(spread);
            if *rotate {
                offset = rotate45(&offset);
            }
            spec.clip_inside(&phi_star.add(&offset), margin)
        })
        .collect();
    let tasks = spec.stream_from_centers(centers.clone())?;
    let reference = vec![phi_star; spec.tasks];
    Ok(TaskStream { tasks, centers, reference, path_length: 0.0 })
}

/// Task distribution Q: centers μ + dispersion·u with u uniform on the unit
/// sphere; losses have targets θ_P + noise·z with z uniform on the sphere.
#[derive(Debug, Clone)]
pub struct DistributionalEnv {
    spec: EnvSpec,
    mean: ParamVector,
    dispersion: f64,
}

/// A task drawn from Q.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTask {
    pub center: ParamVector,
    pub task: Task,
}

pub fn gen_distributional(spec: &EnvSpec) -> Result<DistributionalEnv> {
    spec.validate()?;
    let EnvKind::Distributional { dispersion } = spec.kind else {
        return Err(spec_error("gen_distributional needs a distributional environment"));
    };
    let mean = spec.reference_center()?;
    let margin = match spec.family {
        LossKind::Quadratic => dispersion + spec.noise,
        LossKind::Logistic => dispersion,
    };
    if !spec.inside(&mean, margin) {
        return Err(spec_error("dispersion plus noise leaves the domain"));
    }
    Ok(DistributionalEnv { spec: spec.clone(), mean, dispersion })
}

impl DistributionalEnv {
    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn mean(&self) -> &ParamVector {
        &self.mean
    }

    /// E[θ*] over tasks (the oracle initialization).
    pub fn expected_optimum(&self) -> &ParamVector {
        &self.mean
    }

    /// V_Q² = E‖θ*_ERM − E θ*‖² = dispersion² + noise²/m for quadratic tasks.
    pub fn v_q(&self) -> Result<f64> {
        match self.spec.family {
            LossKind::Quadratic => {
                Ok((self.dispersion.powi(2) + self.spec.noise.powi(2) / self.spec.m as f64).sqrt())
            }
            LossKind::Logistic => Err(ArubaError::Unsupported("no closed-form task variance for logistic losses".into())),
        }
    }

    fn stream(&self, split: &str, index: usize) -> SeedStream {
        SeedStream::new(self.spec.seed).named(split).child(index as u64)
    }

    pub fn sample_center(&self, rng: &mut Rng) -> ParamVector {
        self.mean.axpy(self.dispersion, &random_direction(rng, self.spec.dim))
    }

    /// `n` i.i.d. losses from the task with center `center`.
    pub fn sample_losses(&self, center: &ParamVector, n: usize, rng: &mut Rng) -> Result<Vec<LossOracle>> {
        match self.spec.family {
            LossKind::Quadratic => {
                let w = self.spec.quadratic_weight();
                (0..n)
                    .map(|_| {
                        let z = random_direction(rng, self.spec.dim);
                        LossOracle::quadratic(center.axpy(self.spec.noise, &z), w)
                    })
                    .collect()
            }
            LossKind::Logistic => self.spec.logistic_losses(center, n, rng),
        }
    }

    fn sample(&self, split: &str, index: usize, m: usize) -> Result<SampledTask> {
        let seeds = self.stream(split, index);
        let center = self.sample_center(&mut seeds.named("center").rng());
        let losses = self.sample_losses(&center, m, &mut seeds.named("losses").rng())?;
        let task = Task::with_lipschitz(losses, self.spec.lipschitz, &self.spec.domain)?;
        Ok(SampledTask { center, task })
    }

    /// Meta-training task `index`.
    pub fn train_task(&self, index: usize) -> Result<SampledTask> {
        self.sample("meta-train", index, self.spec.m)
    }

    /// Meta-test task `index` with `m` training losses.
    pub fn test_task(&self, index: usize, m: usize) -> Result<SampledTask> {
        self.sample("meta-test", index, m)
    }

    /// Held-out losses for meta-test task `index`.
    pub fn held_out_losses(&self, center: &ParamVector, index: usize, n: usize) -> Result<Vec<LossOracle>> {
        let mut rng = self.stream("meta-test", index).named("held-out").rng();
        self.sample_losses(center, n, &mut rng)
    }

    pub fn train_stream(&self) -> Result<Vec<Task>> {
        (0..self.spec.tasks).map(|t| self.train_task(t).map(|s| s.task)).collect()
    }

    /// ℓ_P(θ) = (w/2)(‖θ − θ_P‖² + noise²) for quadratic tasks.
    pub fn population_risk(&self, center: &ParamVector, theta: &ParamVector) -> Result<f64> {
        match self.spec.family {
            LossKind::Quadratic => {
                let w = self.spec.quadratic_weight();
                Ok(0.5 * w * (theta.distance(center).powi(2) + self.spec.noise.powi(2)))
            }
            LossKind::Logistic => Err(ArubaError::Unsupported("no closed-form risk for logistic losses".into())),
        }
    }
}

/// min_φ (1/T)Σ‖θ_t − φ‖², rooted: the empirical deviation of a set of points.
pub fn empirical_deviation(points: &[ParamVector]) -> Result<f64> {
    let mean = ParamVector::mean_of(points)?;
    Ok((points.iter().map(|p| p.distance(&mean).powi(2)).sum::<f64>() / points.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(kind: EnvKind) -> EnvSpec {
        EnvSpec {
            kind,
            dim: 3,
            m: 5,
            tasks: 20,
            family: LossKind::Quadratic,
            domain: Domain::ball_at_origin(3, 1.0).unwrap(),
            lipschitz: 1.0,
            noise: 0.1,
            center: None,
            seed: 9,
        }
    }

    #[test]
    fn zero_deviation_pins_every_optimum() {
        let spec = base(EnvKind::Static { deviation: 0.0 });
        let s = gen_static(&spec).unwrap();
        let phi = spec.reference_center().unwrap();
        assert!(s.centers.iter().all(|c| c == &phi));
    }

    #[test]
    fn oversized_deviation_rejected() {
        let spec = base(EnvKind::Static { deviation: 0.95 });
        assert!(matches!(gen_static(&spec).unwrap_err(), ArubaError::InvalidSpec(_)));
    }

    #[test]
    fn single_task_single_loss() {
        let mut spec = base(EnvKind::Static { deviation: 0.1 });
        spec.tasks = 1;
        spec.m = 1;
        let s = gen_static(&spec).unwrap();
        assert_eq!(s.tasks.len(), 1);
        assert_eq!(s.tasks[0].m(), 1);
    }

    #[test]
    fn two_phases_have_path_length_two() {
        let mut spec = base(EnvKind::Dynamic {
            schedule: DriftSchedule::Phases {
                points: vec![
                    ParamVector::new(vec![-1.0, 0.0, 0.0]).unwrap(),
                    ParamVector::new(vec![1.0, 0.0, 0.0]).unwrap(),
                ],
            },
            deviation: 0.05,
        });
        spec.domain = Domain::cube(3, 2.0).unwrap();
        let s = gen_dynamic(&spec).unwrap();
        assert!((s.path_length - 2.0).abs() < 1e-15);
    }

    #[test]
    fn geometry_spread_on_one_coordinate() {
        let mut spec = base(EnvKind::Geometry {
            spread: ParamVector::new(vec![0.2, 0.0, 0.0]).unwrap(),
            rotate: false,
        });
        spec.domain = Domain::cube(3, 1.0).unwrap();
        let s = gen_geometry(&spec).unwrap();
        let phi = spec.reference_center().unwrap();
        for c in &s.centers {
            assert_eq!(c[1], phi[1]);
            assert_eq!(c[2], phi[2]);
        }
        assert!(s.centers.iter().any(|c| c[0] != phi[0]));
    }

    #[test]
    fn distributional_without_spread_is_a_point_mass() {
        let mut spec = base(EnvKind::Distributional { dispersion: 0.0 });
        spec.noise = 0.0;
        let env = gen_distributional(&spec).unwrap();
        let a = env.train_task(0).unwrap();
        let b = env.train_task(7).unwrap();
        assert_eq!(a.task, b.task);
    }
}
