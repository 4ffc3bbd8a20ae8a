use nalgebra::DMatrix;

use crate::error::{invalid, ArubaError, Result};
use crate::linalg::{frobenius, is_symmetric, min_eigenvalue, spd_power, symmetrize};
use crate::param::ParamVector;
use crate::solver::to_dvector;

pub const RICCATI_TOLERANCE: f64 = 1e-8;

/// Outer-product accumulators B² (distances) and G² (gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixScaleState {
    b2: DMatrix<f64>,
    g2: DMatrix<f64>,
    eps: f64,
    zeta: f64,
    t: usize,
}

impl MatrixScaleState {
    pub fn new(dim: usize, eps: f64, zeta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(eps > 0.0) || !(zeta > 0.0) || !eps.is_finite() || !zeta.is_finite() {
            return Err(invalid(format!("ε and ζ must be positive, got {eps} and {zeta}")));
        }
        let id = DMatrix::<f64>::identity(dim, dim);
        Ok(Self { b2: &id * (eps * eps), g2: &id * (zeta * zeta), eps, zeta, t: 1 })
    }

    pub fn b2(&self) -> &DMatrix<f64> {
        &self.b2
    }

    pub fn g2(&self) -> &DMatrix<f64> {
        &self.g2
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// B² += ε²I + ½(θ̂ − φ)(θ̂ − φ)ᵀ, G² += ζ²I + Σ∇∇ᵀ.
    pub fn accumulate(&mut self, phi: &ParamVector, theta_hat: &ParamVector, gradients: &[ParamVector]) -> Result<()> {
        let d = self.b2.nrows();
        if phi.dim() != d || theta_hat.dim() != d || gradients.iter().any(|g| g.dim() != d) {
            return Err(invalid("dimension mismatch in matrix accumulation"));
        }
        let id = DMatrix::<f64>::identity(d, d);
        let diff = to_dvector(&theta_hat.sub(phi));
        self.b2 += &id * (self.eps * self.eps) + &diff * diff.transpose() * 0.5;
        self.g2 += &id * (self.zeta * self.zeta);
        for g in gradients {
            let v = to_dvector(g);
            self.g2 += &v * v.transpose();
        }
        if !is_symmetric(&self.b2, 1e-10) || !is_symmetric(&self.g2, 1e-10) {
            return Err(ArubaError::Internal("accumulator lost symmetry".into()));
        }
        self.b2 = symmetrize(&self.b2);
        self.g2 = symmetrize(&self.g2);
        self.t += 1;
        Ok(())
    }

    pub fn h(&self) -> Result<DMatrix<f64>> {
        riccati_h(&self.b2, &self.g2)
    }
}

/// The unique symmetric positive definite H with H·G²·H = B².
pub fn riccati_h(b2: &DMatrix<f64>, g2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !b2.is_square() || b2.shape() != g2.shape() {
        return Err(invalid("Riccati inputs must be square and of equal shape"));
    }
    for (name, m) in [("B²", b2), ("G²", g2)] {
        if !is_symmetric(m, 1e-10) {
            return Err(invalid(format!("{name} is not symmetric")));
        }
        if !(min_eigenvalue(m) > 0.0) {
            return Err(invalid(format!("{name} is not positive definite")));
        }
    }
    let g = spd_power(g2, 0.5)?;
    let g_inv = spd_power(g2, -0.5)?;
    let inner = spd_power(&symmetrize(&(&g * b2 * &g)), 0.5)?;
    let h = symmetrize(&(&g_inv * inner * &g_inv));
    let residual = frobenius(&(&h * g2 * &h - b2)) / frobenius(b2);
    if !(residual <= RICCATI_TOLERANCE) {
        return Err(ArubaError::Numeric(format!("Riccati residual {residual:.3e} exceeds tolerance")));
    }
    Ok(h)
}
