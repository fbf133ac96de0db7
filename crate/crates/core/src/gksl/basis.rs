//! Generalized Gell-Mann basis of traceless Hermitian matrices.
//!
//! Order ("gellmann-v1"): the symmetric elements `(e_jk + e_kj)/√2` for
//! `j < k` in lexicographic order, then the antisymmetric elements
//! `−i(e_jk − e_kj)/√2` in the same order, then the diagonal elements
//! `(Σ_{j<l} e_jj − l·e_ll)/√(l(l+1))` for `l = 1..d−1`.
//! Every element satisfies `tr(F_k F_l) = δ_kl`.

use crate::matcore::{CMatrix, C64};

pub const BASIS_NAME: &str = "gellmann-v1";

pub fn gellmann_basis(d: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = C64::new(s, 0.0);
            m[(k, j)] = C64::new(s, 0.0);
            basis.push(m);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = C64::new(0.0, -s);
            m[(k, j)] = C64::new(0.0, s);
            basis.push(m);
        }
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = C64::new(1.0 / norm, 0.0);
        }
        m[(l, l)] = C64::new(-(l as f64) / norm, 0.0);
        basis.push(m);
    }
    basis
}

/// Coordinates `c_k = tr(F_k X)` of the traceless part of `x`, together with the
/// identity coefficient `tr(X)/d`.
pub fn coordinates(basis: &[CMatrix], x: &CMatrix) -> (Vec<C64>, C64) {
    let d = x.rows();
    let coords = basis.iter().map(|f| f.inner(x)).collect();
    (coords, x.trace() / d as f64)
}
