//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use super::matrix::{CMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Hermiticity tolerance used by [`hermitian_eig`], relative to `1 + ‖M‖_F`.
pub const HERMITIAN_TOL: f64 = 1e-12;

const OFF_DIAGONAL_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// Spectral decomposition `M = U diag(λ) U†`.
#[derive(Clone, Debug)]
pub struct Eigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors; each column has its
    /// first non-negligible component real and positive.
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `U f(Λ) U†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        self.with_values(&mapped)
    }

    /// `U diag(values) U†` with the eigenvectors kept.
    pub fn with_values(&self, values: &[f64]) -> CMatrix {
        let n = values.len();
        let u = &self.vectors;
        CMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| u[(i, k)] * values[k] * u[(j, k)].conj())
                .sum()
        })
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(|x| x)
    }
}

/// Eigendecomposition of a Hermitian matrix. Rejects inputs whose Hermiticity
/// deviation exceeds [`HERMITIAN_TOL`].
pub fn hermitian_eig(m: &CMatrix) -> Result<Eigen> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    if !m.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::NonHermitianInput {
            deviation: m.hermiticity_deviation(),
        });
    }
    Ok(eigh(&m.hermitian_part()))
}

/// Eigendecomposition of the Hermitian part of `m`, without validation.
///
/// Used internally where the input is Hermitian up to accumulated rounding.
pub fn eigh(m: &CMatrix) -> Eigen {
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm();

    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) < OFF_DIAGONAL_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the sweep order for exactly equal eigenvalues.
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));

    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut u = v.column(k);
        fix_phase(&mut u);
        vectors.set_column(col, &u);
    }
    Eigen { values, vectors }
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// One complex Jacobi rotation annihilating `a[p, q]`.
///
/// The phase of `a[p, q]` is first removed by `diag(1, e^{-iφ})`, then a real
/// rotation diagonalizes the resulting real symmetric 2×2 block.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let magnitude = apq.norm();
    if magnitude == 0.0 {
        return;
    }
    let phase = apq / magnitude;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;

    let theta = (aqq - app) / (2.0 * magnitude);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let g_pp = C64::new(c, 0.0);
    let g_pq = C64::new(s, 0.0);
    let g_qp = -phase.conj() * s;
    let g_qq = phase.conj() * c;

    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * g_pp + akq * g_qp;
        a[(k, q)] = akp * g_pq + akq * g_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * g_pp + vkq * g_qp;
        v[(k, q)] = vkp * g_pq + vkq * g_qq;
    }
}

fn fix_phase(u: &mut [C64]) {
    if let Some(first) = u.iter().copied().find(|z| z.norm() > 1e-10) {
        let rot = first.conj() / first.norm();
        for z in u.iter_mut() {
            *z *= rot;
        }
    }
}

/// Spectral norm of a Hermitian matrix (largest |λ|).
pub fn hermitian_norm2(m: &CMatrix) -> f64 {
    let e = eigh(m);
    e.max().abs().max(e.min().abs())
}

/// Trace norm of a Hermitian matrix (Σ|λ|).
pub fn trace_norm(m: &CMatrix) -> f64 {
    eigh(m).values.iter().map(|x| x.abs()).sum()
}

/// Minimum eigenvalue of the Hermitian part.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).min()
}

/// Principal square root of a PSD matrix (negative eigenvalues clipped to 0).
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    eigh(m).apply_fn(|x| x.max(0.0).sqrt())
}

/// Orthonormal basis (as matrix columns) of the subspace spanned by eigenvectors
/// whose eigenvalue satisfies `keep`.
pub fn eigenspace(e: &Eigen, keep: impl Fn(f64) -> bool) -> CMatrix {
    let n = e.values.len();
    let idx: Vec<usize> = (0..n).filter(|&k| keep(e.values[k])).collect();
    let mut b = CMatrix::zeros(n, idx.len());
    for (col, &k) in idx.iter().enumerate() {
        b.set_column(col, &e.vector(k));
    }
    b
}

/// Unit-trace identity helper: `I/n`.
pub fn maximally_mixed(n: usize) -> CMatrix {
    CMatrix::identity(n).scale(1.0 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::matrix::{pauli, ONE};

    #[test]
    fn diagonal_degenerate_input_keeps_identity_frame() {
        let e = hermitian_eig(&CMatrix::diag(&[0.5, 0.5])).unwrap();
        assert_eq!(e.values, vec![0.5, 0.5]);
        assert_eq!(e.vectors, CMatrix::identity(2));
    }

    #[test]
    fn all_ones_projector() {
        let m = CMatrix::real(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let e = hermitian_eig(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!(e.values[1].abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u0 = e.vector(0);
        let u1 = e.vector(1);
        assert!((u0[0] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!((u0[1] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!((u1[0] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!((u1[1] - C64::new(-s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn pauli_y_spectrum() {
        let e = hermitian_eig(&pauli::y()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
        assert!(e.reconstruct().distance(&pauli::y()) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            hermitian_eig(&m),
            Err(Error::NonHermitianInput { .. })
        ));
    }

    #[test]
    fn zero_matrix() {
        let e = hermitian_eig(&CMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
        assert_eq!(e.vectors, CMatrix::identity(3));
    }

    #[test]
    fn phase_convention() {
        let m = CMatrix::real(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 2.0]]).scale_c(ONE);
        let e = hermitian_eig(&m).unwrap();
        for k in 0..3 {
            let u = e.vector(k);
            let first = u.iter().find(|z| z.norm() > 1e-10).unwrap();
            assert!(first.im.abs() < 1e-15 && first.re > 0.0);
        }
    }
}
