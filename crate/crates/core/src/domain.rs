//! Convex action sets and (weighted) projections onto them.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ArubaError, Result};
use crate::geometry::Geometry;
use crate::param::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Ball { center: ParamVector, radius: f64 },
    Box { lo: ParamVector, hi: ParamVector },
    Simplex { dim: usize },
    Unconstrained { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    kind: DomainKind,
}

impl Domain {
    pub fn new(kind: DomainKind) -> Result<Self> {
        match &kind {
            DomainKind::Ball { radius, .. } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(invalid(format!("ball radius must be positive, got {radius}")));
                }
            }
            DomainKind::Box { lo, hi } => {
                lo.same_dim(hi)?;
                if lo.iter().zip(hi.iter()).any(|(l, h)| !(l < h)) {
                    return Err(invalid("box bounds must satisfy lo < hi in every coordinate"));
                }
            }
            DomainKind::Simplex { dim } | DomainKind::Unconstrained { dim } => {
                if *dim == 0 {
                    return Err(invalid("domain dimension must be at least 1"));
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn ball(center: ParamVector, radius: f64) -> Result<Self> {
        Self::new(DomainKind::Ball { center, radius })
    }

    pub fn ball_at_origin(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(ParamVector::zeros(dim), radius)
    }

    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(DomainKind::Box {
            lo: ParamVector::filled(dim, -half_width),
            hi: ParamVector::filled(dim, half_width),
        })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        Self::new(DomainKind::Simplex { dim })
    }

    pub fn unconstrained(dim: usize) -> Result<Self> {
        Self::new(DomainKind::Unconstrained { dim })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DomainKind::Ball { center, .. } => center.dim(),
            DomainKind::Box { lo, .. } => lo.dim(),
            DomainKind::Simplex { dim } | DomainKind::Unconstrained { dim } => *dim,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.kind, DomainKind::Unconstrained { .. })
    }

    /// Default initialization and tie-break anchor: the center of the set.
    pub fn center(&self) -> ParamVector {
        match &self.kind {
            DomainKind::Ball { center, .. } => center.clone(),
            DomainKind::Box { lo, hi } => lo.add(hi).scale(0.5),
            DomainKind::Simplex { dim } => ParamVector::filled(*dim, 1.0 / *dim as f64),
            DomainKind::Unconstrained { dim } => ParamVector::zeros(*dim),
        }
    }

    pub fn contains(&self, theta: &ParamVector, tol: f64) -> bool {
        if theta.dim() != self.dim() || !theta.is_finite() {
            return false;
        }
        match &self.kind {
            DomainKind::Ball { center, radius } => theta.distance(center) <= radius + tol,
            DomainKind::Box { lo, hi } => theta
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(&t, (&l, &h))| t >= l - tol && t <= h + tol),
            DomainKind::Simplex { .. } => {
                theta.iter().all(|&t| t >= -tol) && (theta.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            DomainKind::Unconstrained { .. } => true,
        }
    }

    /// ℓ₂ diameter (infinite when unbounded).
    pub fn diameter_l2(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius, .. } => 2.0 * radius,
            DomainKind::Box { lo, hi } => hi.distance(lo),
            DomainKind::Simplex { .. } => std::f64::consts::SQRT_2,
            DomainKind::Unconstrained { .. } => f64::INFINITY,
        }
    }

    /// D with D² ≥ max Breg(θ‖φ) over members.
    pub fn diameter_bound(&self, geometry: Geometry) -> Result<f64> {
        match geometry {
            Geometry::Euclidean if self.is_bounded() => {
                Ok(self.diameter_l2() / std::f64::consts::SQRT_2)
            }
            Geometry::Euclidean => Err(invalid("unbounded domain has no divergence bound")),
            Geometry::NegativeEntropy => Err(invalid(
                "entropy divergence is unbounded on the simplex; supply an explicit bound",
            )),
        }
    }

    /// max_{θ∈Θ} ‖θ − a‖₂.
    pub fn max_distance_from(&self, a: &ParamVector) -> f64 {
        match &self.kind {
            DomainKind::Ball { center, radius } => a.distance(center) + radius,
            DomainKind::Box { lo, hi } => a
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(&x, (&l, &h))| {
                    let far = (x - l).abs().max((x - h).abs());
                    far * far
                })
                .sum::<f64>()
                .sqrt(),
            DomainKind::Simplex { dim } => {
                let sq = a.dot(a);
                (0..*dim)
                    .map(|k| (sq - 2.0 * a[k] + 1.0).max(0.0).sqrt())
                    .fold(0.0, f64::max)
            }
            DomainKind::Unconstrained { .. } => f64::INFINITY,
        }
    }

    /// Projection onto the domain in the geometry's divergence, or, when
    /// `weight` is given, in the norm ½Σ(θⱼ−yⱼ)²/wⱼ.
    pub fn project(
        &self,
        geometry: Geometry,
        theta: &ParamVector,
        weight: Option<&ParamVector>,
    ) -> Result<ParamVector> {
        if theta.dim() != self.dim() {
            return Err(invalid(format!(
                "dimension mismatch: point has {}, domain has {}",
                theta.dim(),
                self.dim()
            )));
        }
        if !theta.is_finite() {
            return Err(invalid("cannot project a non-finite point"));
        }
        if let Some(w) = weight {
            w.same_dim(theta)?;
            if w.iter().any(|&x| !(x > 0.0)) {
                return Err(invalid("projection weights must be strictly positive"));
            }
        }
        match geometry {
            Geometry::NegativeEntropy => {
                geometry.check_domain(self)?;
                if weight.is_some() {
                    return Err(ArubaError::Unsupported(
                        "weighted projection under the entropy geometry".into(),
                    ));
                }
                if theta.iter().any(|&t| t < 0.0) {
                    return Err(ArubaError::Boundary(
                        "entropy projection of a vector with negative coordinates".into(),
                    ));
                }
                let total: f64 = theta.iter().sum();
                if !(total > 0.0) {
                    return Err(ArubaError::Boundary("entropy projection of the zero vector".into()));
                }
                Ok(theta.scale(1.0 / total))
            }
            Geometry::Euclidean => match (&self.kind, weight) {
                (DomainKind::Unconstrained { .. }, _) => Ok(theta.clone()),
                (DomainKind::Box { lo, hi }, _) => Ok(clip(theta, lo, hi)),
                (DomainKind::Ball { center, radius }, None) => {
                    let offset = theta.sub(center);
                    let dist = offset.norm();
                    if dist <= *radius {
                        Ok(theta.clone())
                    } else {
                        Ok(center.axpy(radius / dist, &offset))
                    }
                }
                (DomainKind::Ball { center, radius }, Some(w)) => {
                    Ok(weighted_ball_projection(theta, center, *radius, w))
                }
                (DomainKind::Simplex { .. }, None) => Ok(simplex_projection(theta)),
                (DomainKind::Simplex { .. }, Some(_)) => Err(ArubaError::Unsupported(
                    "weighted-norm projection onto the simplex".into(),
                )),
            },
        }
    }

    /// argmin_{θ∈Θ} ½(θ−y)ᵀ Q (θ−y) for SPD `q`. Exact on unconstrained
    /// domains; on boxes solved by cyclic coordinate descent to roundoff.
    pub fn project_quadratic(&self, y: &ParamVector, q: &DMatrix<f64>) -> Result<ParamVector> {
        let d = self.dim();
        if q.nrows() != d || q.ncols() != d || y.dim() != d {
            return Err(invalid("metric dimension does not match the domain"));
        }
        match &self.kind {
            DomainKind::Unconstrained { .. } => Ok(y.clone()),
            DomainKind::Box { lo, hi } => {
                let mut x: Vec<f64> = clip(y, lo, hi).into_vec();
                let yv = y.as_slice();
                let scale = 1.0 + yv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for _ in 0..100_000 {
                    let mut max_change = 0.0f64;
                    for j in 0..d {
                        let qjj = q[(j, j)];
                        if !(qjj > 0.0) {
                            return Err(invalid("metric must have a positive diagonal"));
                        }
                        let grad: f64 = (0..d).map(|k| q[(j, k)] * (x[k] - yv[k])).sum();
                        let next = (x[j] - grad / qjj).clamp(lo[j], hi[j]);
                        max_change = max_change.max((next - x[j]).abs());
                        x[j] = next;
                    }
                    if max_change <= 1e-15 * scale {
                        return Ok(ParamVector::from_vec(x));
                    }
                }
                Err(ArubaError::Numeric(
                    "box-constrained metric projection did not settle".into(),
                ))
            }
            _ => Err(ArubaError::Unsupported(
                "full-matrix projection is only exact on box or unconstrained domains".into(),
            )),
        }
    }

    /// A random member, roughly uniform; used by property checks.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let d = self.dim();
        match &self.kind {
            DomainKind::Ball { center, radius } => {
                let dir = random_direction(rng, d);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                center.axpy(r, &dir)
            }
            DomainKind::Box { lo, hi } => ParamVector::from_vec(
                lo.iter()
                    .zip(hi.iter())
                    .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
                    .collect(),
            ),
            DomainKind::Simplex { .. } => {
                let e: Vec<f64> = (0..d)
                    .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-12)
                    .collect();
                let s: f64 = e.iter().sum();
                ParamVector::from_vec(e.into_iter().map(|x| x / s).collect())
            }
            DomainKind::Unconstrained { .. } => ParamVector::from_vec(
                (0..d).map(|_| 10.0 * (2.0 * rng.random::<f64>() - 1.0)).collect(),
            ),
        }
    }
}

fn clip(theta: &ParamVector, lo: &ParamVector, hi: &ParamVector) -> ParamVector {
    ParamVector::from_vec(
        theta
            .iter()
            .zip(lo.iter().zip(hi.iter()))
            .map(|(&t, (&l, &h))| t.clamp(l, h))
            .collect(),
    )
}

/// Euclidean projection onto the probability simplex (sort-based).
fn simplex_projection(y: &ParamVector) -> ParamVector {
    let mut u: Vec<f64> = y.as_slice().to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            tau = t;
        }
    }
    y.map(|v| (v - tau).max(0.0))
}

/// argmin_{‖x−c‖≤r} ½Σ(xⱼ−yⱼ)²/wⱼ. Stationarity gives
/// xⱼ − cⱼ = (yⱼ − cⱼ)/(1 + μwⱼ); μ ≥ 0 is found by bisection.
fn weighted_ball_projection(
    y: &ParamVector,
    center: &ParamVector,
    radius: f64,
    w: &ParamVector,
) -> ParamVector {
    let offset = y.sub(center);
    if offset.norm() <= radius {
        return y.clone();
    }
    let point = |mu: f64| -> ParamVector {
        ParamVector::from_vec(
            offset
                .iter()
                .zip(w.iter())
                .map(|(&o, &wj)| o / (1.0 + mu * wj))
                .collect(),
        )
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while point(hi).norm() > radius {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if point(mid).norm() > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    center.add(&point(hi))
}

pub(crate) fn random_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ParamVector {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return ParamVector::from_vec(v.into_iter().map(|x| x / n).collect());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ball_projection_scales_radially() {
        let ball = Domain::ball_at_origin(2, 1.0).unwrap();
        let p = ball.project(Geometry::Euclidean, &pv(&[3.0, 4.0]), None).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let inside = pv(&[0.1, -0.2]);
        assert_eq!(ball.project(Geometry::Euclidean, &inside, None).unwrap(), inside);
    }

    #[test]
    fn weighted_box_projection_is_a_clip() {
        let cube = Domain::cube(2, 1.0).unwrap();
        let w = pv(&[10.0, 0.1]);
        let p = cube
            .project(Geometry::Euclidean, &pv(&[2.0, -3.0]), Some(&w))
            .unwrap();
        assert_eq!(p.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn simplex_weighted_projection_is_unsupported() {
        let s = Domain::simplex(3).unwrap();
        let err = s
            .project(Geometry::Euclidean, &pv(&[0.2, 0.3, 0.5]), Some(&pv(&[1.0, 2.0, 3.0])))
            .unwrap_err();
        assert!(matches!(err, ArubaError::Unsupported(_)));
    }

    #[test]
    fn simplex_projection_lands_on_simplex() {
        let s = Domain::simplex(4).unwrap();
        let p = s
            .project(Geometry::Euclidean, &pv(&[2.0, -1.0, 0.5, 0.7]), None)
            .unwrap();
        assert!(s.contains(&p, 1e-12));
        // KKT: positive coordinates share the same shift
        let shifts: Vec<f64> = [2.0, 0.5, 0.7]
            .iter()
            .zip([p[0], p[2], p[3]])
            .filter(|(_, q)| *q > 0.0)
            .map(|(y, q)| y - q)
            .collect();
        for s in &shifts {
            assert!((s - shifts[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_ball_projection_satisfies_kkt() {
        let ball = Domain::ball_at_origin(3, 1.0).unwrap();
        let w = pv(&[1.0, 4.0, 0.25]);
        let y = pv(&[2.0, -1.0, 3.0]);
        let x = ball.project(Geometry::Euclidean, &y, Some(&w)).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-12);
        // (x − y)/w = −μ x for a common μ
        let ratios: Vec<f64> = (0..3).map(|j| (y[j] - x[j]) / (w[j] * x[j])).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-8 * ratios[0].abs().max(1.0));
        }
    }

    #[test]
    fn quadratic_box_projection_matches_clip_for_diagonal_metric() {
        let cube = Domain::cube(3, 1.0).unwrap();
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 5.0]));
        let y = pv(&[1.5, -0.3, -4.0]);
        let x = cube.project_quadratic(&y, &q).unwrap();
        assert_eq!(x.as_slice(), &[1.0, -0.3, -1.0]);
    }

    #[test]
    fn quadratic_box_projection_satisfies_kkt() {
        let cube = Domain::cube(2, 1.0).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.5, 1.5, 2.0]);
        let y = pv(&[2.0, 0.0]);
        let x = cube.project_quadratic(&y, &q).unwrap();
        // x0 on the bound, free coordinate has zero gradient
        assert!((x[0] - 1.0).abs() < 1e-14);
        let g1 = q[(1, 0)] * (x[0] - y[0]) + q[(1, 1)] * (x[1] - y[1]);
        assert!(g1.abs() < 1e-12);
        let g0 = q[(0, 0)] * (x[0] - y[0]) + q[(0, 1)] * (x[1] - y[1]);
        assert!(g0 < 0.0, "pushing outward at the active bound");
    }

    #[test]
    fn samples_are_members() {
        let mut rng = SeedStream::new(3).rng();
        for dom in [
            Domain::ball_at_origin(4, 2.0).unwrap(),
            Domain::cube(3, 0.5).unwrap(),
            Domain::simplex(5).unwrap(),
        ] {
            for _ in 0..200 {
                assert!(dom.contains(&dom.sample(&mut rng), 1e-12));
            }
        }
    }
}
