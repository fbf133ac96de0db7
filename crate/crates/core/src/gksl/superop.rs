//! Superoperators on `d×d` matrices, their Choi matrices, the GKSL membership
//! test and the matrix exponential.
//!
//! Conventions, fixed repo-wide:
//! * column-stacking vectorization, `vec(X)[i + d·j] = X[i, j]`;
//! * Choi matrix `C = Σ_ij e_ij ⊗ Φ(e_ij)`, so `C[(i·d + a), (j·d + b)] = Φ(e_ij)[a, b]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::eig::{eigh, hermitian_norm2};
use crate::matcore::{CMatrix, C64, ONE, ZERO};

/// Default relative tolerance of [`Superoperator::gksl_validity`].
pub const VALIDITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != dim * dim || matrix.cols() != dim * dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0} superoperator matrix", dim * dim),
                found: format!("{}x{}", matrix.rows(), matrix.cols()),
            });
        }
        Ok(Self { dim, matrix })
    }

    /// Tabulates a linear map by its action on the matrix units.
    pub fn from_map(dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let n = dim * dim;
        let mut matrix = CMatrix::zeros(n, n);
        for j in 0..dim {
            for i in 0..dim {
                let image = f(&CMatrix::unit(dim, i, j));
                matrix.set_column(i + dim * j, &image.vectorize());
            }
        }
        Self { dim, matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMatrix::identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// Replacer channel `R_σ(X) = tr(X)·σ`.
    pub fn replacer(sigma: &CMatrix) -> Self {
        let dim = sigma.rows();
        let n = dim * dim;
        let v = sigma.vectorize();
        let mut matrix = CMatrix::zeros(n, n);
        for i in 0..dim {
            matrix.set_column(i + dim * i, &v);
        }
        Self { dim, matrix }
    }

    /// Hamiltonian part `X ↦ −i[H, X]`.
    pub fn hamiltonian(h: &CMatrix) -> Self {
        Self::from_map(h.rows(), |x| h.commutator(x).scale_c(C64::new(0.0, -1.0)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.rows() != self.dim || x.cols() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", self.dim),
                found: format!("{}x{}", x.rows(), x.cols()),
            });
        }
        Ok(CMatrix::unvectorize(
            &self.matrix.mul_vec(&x.vectorize()),
            self.dim,
        ))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            matrix: self.matrix.matmul(&other.matrix),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            matrix: self.matrix.scale(s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            matrix: &self.matrix - &other.matrix,
        }
    }

    /// `(1 − w)·self + w·other`.
    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        let mut matrix = self.matrix.scale(1.0 - w);
        matrix.axpy(C64::new(w, 0.0), &other.matrix);
        Self {
            dim: self.dim,
            matrix,
        }
    }

    pub fn norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.matrix.distance(&other.matrix)
    }

    pub fn choi(&self) -> ChoiMatrix {
        let d = self.dim;
        let n = d * d;
        let mut c = CMatrix::zeros(n, n);
        for i in 0..d {
            for j in 0..d {
                let col = i + d * j;
                for a in 0..d {
                    for b in 0..d {
                        c[(i * d + a, j * d + b)] = self.matrix[(a + d * b, col)];
                    }
                }
            }
        }
        ChoiMatrix { dim: d, matrix: c }
    }

    /// `exp(t·S)` by scaling and squaring.
    pub fn exp(&self, t: f64) -> Self {
        Self {
            dim: self.dim,
            matrix: expm(&self.matrix.scale(t)),
        }
    }

    /// Membership test for the closure of the GKSL generators: Hermiticity
    /// preservation, trace annihilation and conditional complete positivity,
    /// all relative to `tol·‖Choi‖₂`.
    pub fn gksl_validity(&self, tol: f64) -> GkslValidity {
        let d = self.dim;
        let choi = self.choi();
        let scale = hermitian_norm2(&choi.matrix);

        let hermiticity_preserving = choi.matrix.hermiticity_deviation() <= tol * scale;

        let mut trace_defect: f64 = 0.0;
        for col in 0..d * d {
            let tr: C64 = (0..d).map(|a| self.matrix[(a + d * a, col)]).sum();
            trace_defect = trace_defect.max(tr.norm());
        }
        let trace_annihilating = trace_defect <= tol * scale;

        let min_cond_eig = eigh(&compress_off_omega(&choi.matrix, d)).min();
        let conditionally_cp = min_cond_eig >= -tol * scale;

        GkslValidity {
            hermiticity_preserving,
            trace_annihilating,
            conditionally_cp,
            min_cond_eig,
            valid: hermiticity_preserving && trace_annihilating && conditionally_cp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkslValidity {
    pub hermiticity_preserving: bool,
    pub trace_annihilating: bool,
    pub conditionally_cp: bool,
    pub min_cond_eig: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: CMatrix,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn min_eig(&self) -> f64 {
        eigh(&self.matrix).min()
    }

    /// Recovers the superoperator, inverting the Choi index layout.
    pub fn to_superoperator(&self) -> Superoperator {
        let d = self.dim;
        let n = d * d;
        let mut s = CMatrix::zeros(n, n);
        for i in 0..d {
            for j in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        s[(a + d * b, i + d * j)] = self.matrix[(i * d + a, j * d + b)];
                    }
                }
            }
        }
        Superoperator { dim: d, matrix: s }
    }
}

/// `B†·C·B` where the columns of `B` form the orthonormal basis of the
/// complement of `|Ω⟩ = Σ_i |ii⟩/√d`: the vectors `|ij⟩` for `i ≠ j` and the
/// diagonal combinations `(Σ_{j<l} |jj⟩ − l|ll⟩)/√(l(l+1))`.
fn compress_off_omega(c: &CMatrix, d: usize) -> CMatrix {
    let mut basis: Vec<Vec<(usize, f64)>> = Vec::with_capacity(d * d - 1);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                basis.push(vec![(i * d + j, 1.0)]);
            }
        }
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut v: Vec<(usize, f64)> = (0..l).map(|j| (j * d + j, 1.0 / norm)).collect();
        v.push((l * d + l, -(l as f64) / norm));
        basis.push(v);
    }
    let m = basis.len();
    CMatrix::from_fn(m, m, |a, b| {
        let mut acc = ZERO;
        for &(i, wi) in &basis[a] {
            for &(j, wj) in &basis[b] {
                acc += c[(i, j)] * (wi * wj);
            }
        }
        acc
    })
}

/// Matrix exponential: scaling and squaring around a truncated Taylor series.
///
/// The argument is scaled by `2^{-s}` until its 1-norm is at most 1/2, the
/// series is summed until terms drop below machine precision relative to the
/// partial sum, and the result is squared `s` times.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.rows();
    let norm = a.one_norm();
    if norm == 0.0 {
        return CMatrix::identity(n);
    }
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(s));

    let mut sum = CMatrix::identity(n);
    let mut term = CMatrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        sum += &term;
        if term.one_norm() <= f64::EPSILON * 1e-2 * sum.one_norm() {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

/// `Σ_i e_ii ⊗ e_ii`-style maximally entangled vector `|Ω⟩` in Choi indexing.
pub fn omega(d: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d * d];
    let w = ONE / (d as f64).sqrt();
    for i in 0..d {
        v[i * d + i] = w;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::pauli;

    #[test]
    fn identity_choi_is_unnormalized_bell_projector() {
        let choi = Superoperator::identity(2).choi();
        let omega = omega(2);
        let expected = CMatrix::outer(&omega, &omega).scale(2.0);
        assert!(choi.matrix().distance(&expected) < 1e-15);
        assert!((choi.matrix().trace() - C64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn replacer_choi_is_identity_tensor_sigma() {
        let sigma = CMatrix::real(&[&[0.7, 0.2], &[0.2, 0.3]]);
        let choi = Superoperator::replacer(&sigma).choi();
        let expected = CMatrix::identity(2).kron(&sigma);
        assert!(choi.matrix().distance(&expected) < 1e-15);
    }

    #[test]
    fn replacer_action() {
        let sigma = CMatrix::diag(&[0.0, 1.0]);
        let r = Superoperator::replacer(&sigma);
        let out = r.apply(&CMatrix::diag(&[1.0, 0.0])).unwrap();
        assert!(out.distance(&sigma) < 1e-15);
        assert!(r.apply(&pauli::z()).unwrap().frobenius_norm() < 1e-15);
        assert!(r.choi().min_eig() >= -1e-15);
    }

    #[test]
    fn superoperator_matches_direct_action() {
        let a = CMatrix::from_fn(2, 2, |i, j| C64::new(i as f64 + 0.3, j as f64 - 0.7));
        let map = |x: &CMatrix| a.matmul(x).matmul(&a.adjoint());
        let s = Superoperator::from_map(2, map);
        let x = CMatrix::from_fn(2, 2, |i, j| C64::new((i * 2 + j) as f64, 1.0));
        assert!(s.apply(&x).unwrap().distance(&map(&x)) < 1e-14);
        let back = s.choi().to_superoperator();
        assert!(back.distance(&s) < 1e-15);
    }

    #[test]
    fn validity_of_replacer_generators() {
        let sigma = CMatrix::real(&[&[0.6, 0.1], &[0.1, 0.4]]);
        let r = Superoperator::replacer(&sigma);
        let good = r.sub(&Superoperator::identity(2));
        assert!(good.gksl_validity(VALIDITY_TOL).valid);

        let bad = Superoperator::identity(2).sub(&r);
        let report = bad.gksl_validity(VALIDITY_TOL);
        assert!(!report.valid);
        assert!(report.hermiticity_preserving && report.trace_annihilating);
        assert!(report.min_cond_eig <= -0.6 + 1e-9);
    }

    #[test]
    fn hamiltonian_generator_is_valid() {
        let h = CMatrix::real(&[&[0.3, 1.2], &[1.2, -0.3]]);
        assert!(
            Superoperator::hamiltonian(&h)
                .gksl_validity(VALIDITY_TOL)
                .valid
        );
    }

    #[test]
    fn expm_matches_closed_form() {
        let theta = 0.8;
        let e = expm(&pauli::y().scale_c(C64::new(0.0, -theta)));
        let expected = CMatrix::real(&[&[theta.cos(), -theta.sin()], &[theta.sin(), theta.cos()]]);
        assert!(e.distance(&expected) < 1e-14);

        let big = CMatrix::diag(&[-30.0, 2.0]);
        let e = expm(&big);
        assert!((e[(0, 0)].re - (-30.0f64).exp()).abs() < 1e-25);
        assert!((e[(1, 1)].re - 2.0f64.exp()).abs() < 1e-13);
    }
}
