//! Density matrices, tangent directions and their validation.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::eig::{eigh, hermitian_eig};
use super::matrix::{CMatrix, C64};
use crate::error::{Error, Result};

/// Largest supported Hilbert-space dimension for states.
pub const MAX_DIM: usize = 16;

/// Default tolerance for trace and positivity checks on states.
pub const DENSITY_TOL: f64 = 1e-10;

/// Default eigenvalue threshold separating support from kernel.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub hermitian: bool,
    pub trace_dev: f64,
    pub min_eig: f64,
    pub is_density: bool,
}

/// Checks Hermiticity, unit trace and positivity, each at `tol`.
pub fn validate_density(m: &CMatrix, tol: f64) -> DensityReport {
    if !m.is_square() || !m.is_finite() {
        return DensityReport {
            hermitian: false,
            trace_dev: f64::INFINITY,
            min_eig: f64::NEG_INFINITY,
            is_density: false,
        };
    }
    let hermitian = m.is_hermitian(tol);
    let trace_dev = (m.trace() - C64::new(1.0, 0.0)).norm();
    let min_eig = eigh(m).min();
    DensityReport {
        hermitian,
        trace_dev,
        min_eig,
        is_density: hermitian && trace_dev <= tol && min_eig >= -tol,
    }
}

/// Orthogonal projector onto the span of eigenvectors of `rho` with eigenvalue
/// above `rank_tol`.
pub fn support_projection(rho: &CMatrix, rank_tol: f64) -> Result<CMatrix> {
    if rank_tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "rank_tol must be positive, got {rank_tol}"
        )));
    }
    let e = hermitian_eig(rho)?;
    Ok(e.apply_fn(|x| if x > rank_tol { 1.0 } else { 0.0 }))
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tol(m, DENSITY_TOL)
    }

    pub fn with_tol(m: CMatrix, tol: f64) -> Result<Self> {
        if m.is_square() && m.rows() > MAX_DIM {
            return Err(Error::DimensionCap {
                dim: m.rows(),
                cap: MAX_DIM,
            });
        }
        let report = validate_density(&m, tol);
        if !report.is_density {
            return Err(Error::InvalidDensity(describe(&report)));
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        Self(CMatrix::identity(d).scale(1.0 / d as f64))
    }

    /// Pure state `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[C64]) -> Self {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let u: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self(CMatrix::outer(&u, &u))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

impl Deref for DensityMatrix {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

fn describe(r: &DensityReport) -> String {
    format!(
        "hermitian={}, |tr−1|={:.3e}, min eigenvalue={:.3e}",
        r.hermitian, r.trace_dev, r.min_eig
    )
}

/// A Hermitian traceless matrix: an admissible velocity of a density path.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentDirection(CMatrix);

impl TangentDirection {
    /// Validates Hermiticity and tracelessness (`|tr| ≤ tol·(1 + ‖·‖_F)`).
    pub fn new(m: CMatrix, tol: f64) -> Result<Self> {
        if !m.is_hermitian(tol) {
            return Err(Error::NonHermitianInput {
                deviation: m.hermiticity_deviation(),
            });
        }
        let tr = m.trace().norm();
        if tr > tol * (1.0 + m.frobenius_norm()) {
            return Err(Error::InvalidInput(format!(
                "tangent direction has trace {tr:.3e}"
            )));
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Hermitizes and removes the trace: `v ← (v + v†)/2 − (tr v / d)·I`.
    pub fn project(m: &CMatrix) -> Self {
        let mut h = m.hermitian_part();
        let d = h.rows();
        let shift = h.trace().re / d as f64;
        for i in 0..d {
            h[(i, i)] = C64::new(h[(i, i)].re - shift, 0.0);
        }
        Self(h)
    }

    pub fn zero(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

impl Deref for TangentDirection {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}
