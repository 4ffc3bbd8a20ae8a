use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::param::ParamVector;

fn check_constants(eps: f64, zeta: f64, p: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(invalid(format!("ε must be nonnegative and finite, got {eps}")));
    }
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(invalid(format!("ζ must be positive and finite, got {zeta}")));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(invalid(format!("p must be positive and finite, got {p}")));
    }
    Ok(())
}

/// Per-coordinate accumulators b (squared distances) and g (squared
/// gradients), with rate √(b/g).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagScaleState {
    b: ParamVector,
    g: ParamVector,
    eps: f64,
    zeta: f64,
    p: f64,
    t: usize,
}

impl DiagScaleState {
    pub fn new(dim: usize, eps: f64, zeta: f64, p: f64) -> Result<Self> {
        check_constants(eps, zeta, p)?;
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(Self {
            b: ParamVector::filled(dim, eps * eps),
            g: ParamVector::filled(dim, zeta * zeta),
            eps,
            zeta,
            p,
            t: 1,
        })
    }

    /// Rebuilds a state from saved accumulators.
    pub fn from_parts(b: ParamVector, g: ParamVector, eps: f64, zeta: f64, p: f64, t: usize) -> Result<Self> {
        check_constants(eps, zeta, p)?;
        b.same_dim(&g)?;
        if b.iter().any(|&x| x < 0.0) || g.iter().any(|&x| !(x > 0.0)) {
            return Err(invalid("accumulators must be nonnegative (b) and positive (g)"));
        }
        Ok(Self { b, g, eps, zeta, p, t: t.max(1) })
    }

    pub fn b(&self) -> &ParamVector {
        &self.b
    }

    pub fn g(&self) -> &ParamVector {
        &self.g
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn eta(&self) -> ParamVector {
        ParamVector::from_vec(self.b.iter().zip(self.g.iter()).map(|(b, g)| (b / g).sqrt()).collect())
    }

    /// b ← b + ε²/(t+1)^p + ½(φ − θ̂)², g ← g + ζ²/(t+1)^p + Σ∇².
    pub fn accumulate(&mut self, phi: &ParamVector, theta_hat: &ParamVector, grad_sq: &ParamVector) -> Result<()> {
        phi.same_dim(&self.b)?;
        theta_hat.same_dim(&self.b)?;
        grad_sq.same_dim(&self.b)?;
        if grad_sq.iter().any(|&x| x < 0.0) {
            return Err(invalid("squared gradients must be nonnegative"));
        }
        let decay = ((self.t + 1) as f64).powf(self.p);
        let diff = phi.sub(theta_hat);
        self.b = ParamVector::from_vec(
            self.b
                .iter()
                .zip(diff.iter())
                .map(|(b, d)| b + self.eps * self.eps / decay + 0.5 * d * d)
                .collect(),
        );
        self.g = ParamVector::from_vec(
            self.g
                .iter()
                .zip(grad_sq.iter())
                .map(|(g, s)| g + self.zeta * self.zeta / decay + s)
                .collect(),
        );
        self.t += 1;
        Ok(())
    }
}

/// Scalar accumulators tracking the squared distance norm and the squared
/// gradient norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicScaleState {
    b: f64,
    g: f64,
    eps: f64,
    zeta: f64,
    p: f64,
    t: usize,
}

impl IsotropicScaleState {
    pub fn new(eps: f64, zeta: f64, p: f64) -> Result<Self> {
        check_constants(eps, zeta, p)?;
        Ok(Self { b: eps * eps, g: zeta * zeta, eps, zeta, p, t: 1 })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn eta(&self) -> f64 {
        (self.b / self.g).sqrt()
    }

    pub fn accumulate(&mut self, phi: &ParamVector, theta_hat: &ParamVector, grad_sq_total: f64) -> Result<()> {
        phi.same_dim(theta_hat)?;
        if !(grad_sq_total >= 0.0) {
            return Err(invalid("squared gradient norm must be nonnegative"));
        }
        let decay = ((self.t + 1) as f64).powf(self.p);
        let dist_sq: f64 = phi.sub(theta_hat).iter().map(|d| d * d).sum();
        self.b = self.b + self.eps * self.eps / decay + 0.5 * dist_sq;
        self.g = self.g + self.zeta * self.zeta / decay + grad_sq_total;
        self.t += 1;
        Ok(())
    }
}

/// Test-time refinement: g_{i+1} = g_i + c∇ᵢ², η_{i+1} = √(b/g_{i+1}).
/// Returns the rate before each step and after the last (length n + 1).
pub fn aruba_plusplus_refine(
    b: &ParamVector,
    g: &ParamVector,
    c: f64,
    gradients: &[ParamVector],
) -> Result<Vec<ParamVector>> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(invalid(format!("refinement constant c must be positive, got {c}")));
    }
    b.same_dim(g)?;
    if g.iter().any(|&x| !(x > 0.0)) {
        return Err(invalid("gradient accumulator must be positive"));
    }
    let rate = |g: &ParamVector| {
        ParamVector::from_vec(b.iter().zip(g.iter()).map(|(b, g)| (b / g).sqrt()).collect())
    };
    let mut acc = g.clone();
    let mut out = Vec::with_capacity(gradients.len() + 1);
    out.push(rate(&acc));
    for grad in gradients {
        grad.same_dim(&acc)?;
        acc.add_scaled_assign(c, &grad.squared());
        out.push(rate(&acc));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn initial_rate_is_eps_over_zeta() {
        let s = DiagScaleState::new(3, 0.2, 0.4, 1.0).unwrap();
        assert_eq!(s.eta().as_slice(), &[0.5; 3]);
        let m = 25.0f64;
        let s = DiagScaleState::new(4, 1.0, m.sqrt(), 0.4).unwrap();
        assert!(s.eta().iter().all(|&e| (e - 1.0 / m.sqrt()).abs() < 1e-15));
        let s = DiagScaleState::new(7, 0.05, 0.05, 1.0).unwrap();
        assert_eq!(s.eta().as_slice(), &[1.0; 7]);
    }

    #[test]
    fn zero_task_adds_only_drift() {
        let mut s = DiagScaleState::new(2, 1.0, 1.0, 1.0).unwrap();
        let phi = pv(&[0.3, -0.2]);
        s.accumulate(&phi, &phi, &pv(&[0.0, 0.0])).unwrap();
        assert_eq!(s.b().as_slice(), &[1.5, 1.5]);
        assert_eq!(s.g().as_slice(), &[1.5, 1.5]);
        assert_eq!(s.t(), 2);
    }

    #[test]
    fn zeta_must_be_positive() {
        assert!(DiagScaleState::new(1, 0.0, 0.0, 1.0).is_err());
        assert!(IsotropicScaleState::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn isotropic_increment_uses_norm() {
        let mut s = IsotropicScaleState::new(1.0, 1.0, 1.0).unwrap();
        s.accumulate(&pv(&[0.0, 0.0, 0.0]), &pv(&[1.0, 2.0, 2.0]), 0.0).unwrap();
        assert_eq!(s.b(), 1.0 + 0.5 + 4.5);
    }

    #[test]
    fn refinement_arithmetic() {
        let seq = aruba_plusplus_refine(&pv(&[1.0]), &pv(&[1.0]), 1.0, &[pv(&[1.0]), pv(&[1.0])]).unwrap();
        let got: Vec<f64> = seq.iter().map(|e| e[0]).collect();
        for (g, w) in got.iter().zip([1.0, 0.5f64.sqrt(), (1.0f64 / 3.0).sqrt()]) {
            assert!((g - w).abs() < 1e-15);
        }
        let flat = aruba_plusplus_refine(&pv(&[2.0]), &pv(&[3.0]), 0.5, &vec![pv(&[0.0]); 3]).unwrap();
        assert!(flat.iter().all(|e| e == &flat[0]));
        assert!(aruba_plusplus_refine(&pv(&[1.0]), &pv(&[1.0]), 0.0, &[]).is_err());
    }
}
