//! GKSL generators and superoperators: application, conversion between jump,
//! Kossakowski, superoperator and Choi pictures, and the validity test.

pub mod basis;
pub mod lindbladian;
pub mod superop;

pub use basis::{gellmann_basis, BASIS_NAME};
pub use lindbladian::{dissipator_apply, Dissipator, Lindbladian};
pub use superop::{expm, ChoiMatrix, GkslValidity, Superoperator, VALIDITY_TOL};

use crate::error::Result;
use crate::matcore::{CMatrix, DensityMatrix};

/// Superoperator of the replacer channel `R_σ(X) = tr(X)·σ`.
pub fn replacer_superoperator(sigma: &DensityMatrix) -> Superoperator {
    Superoperator::replacer(sigma)
}

/// `L(X)` for a generator in either form.
pub fn lindbladian_apply(l: &Lindbladian, x: &CMatrix) -> Result<CMatrix> {
    l.apply(x)
}
