//! Dense complex linear algebra: matrices, Hermitian eigendecomposition,
//! density-matrix validation and support projections.

pub mod eig;
pub mod matrix;
pub mod state;

pub use eig::{eigh, hermitian_eig, psd_sqrt, trace_norm, Eigen};
pub use matrix::{pauli, CMatrix, C64, I, ONE, ZERO};
pub use state::{
    support_projection, validate_density, DensityMatrix, DensityReport, TangentDirection,
    DENSITY_TOL, MAX_DIM, RANK_TOL,
};
