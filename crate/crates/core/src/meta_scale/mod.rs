//! Learning the within-task scale: a scalar v (η = v/(G√m)), per-coordinate
//! rates, or a full preconditioning matrix.

mod diagonal;
mod matrix;
pub mod quadrature;
mod scalar;

pub use diagonal::{aruba_plusplus_refine, DiagScaleState, IsotropicScaleState};
pub use matrix::{riccati_h, MatrixScaleState, RICCATI_TOLERANCE};
pub use scalar::{ewoo_gamma, ScalarScaleState, ScalarStrategy};
