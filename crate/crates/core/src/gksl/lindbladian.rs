//! GKSL generators in jump-operator or Kossakowski form.

use super::basis::{coordinates, gellmann_basis};
use super::superop::{GkslValidity, Superoperator};
use crate::error::{Error, Result};
use crate::matcore::eig::{eigh, hermitian_norm2};
use crate::matcore::{CMatrix, C64, ZERO};

/// Kossakowski eigenvalues below `−NEGATIVE_KOSSAKOWSKI_TOL·‖C‖₂` are rejected
/// when converting to jump form.
pub const NEGATIVE_KOSSAKOWSKI_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum Dissipator {
    /// Jump operators `a_i` with rates `γ_i`. Rates may be negative; such a
    /// generator is representable but fails the validity check.
    Jumps {
        operators: Vec<CMatrix>,
        rates: Vec<f64>,
    },
    /// Hermitian `(d²−1)×(d²−1)` coefficient matrix over the Gell-Mann basis.
    Kossakowski(CMatrix),
}

/// `L(X) = −i[H, X] + dissipator(X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lindbladian {
    dim: usize,
    hamiltonian: CMatrix,
    dissipator: Dissipator,
}

/// `L_a(X) = aXa† − ½{a†a, X}`.
pub fn dissipator_apply(a: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    check_square_pair(a, x)?;
    Ok(dissipator_term(a, x))
}

fn dissipator_term(a: &CMatrix, x: &CMatrix) -> CMatrix {
    let ad = a.adjoint();
    let ada = ad.matmul(a);
    let mut out = a.matmul(x).matmul(&ad);
    out.axpy(C64::new(-0.5, 0.0), &ada.anticommutator(x));
    out
}

fn check_square_pair(a: &CMatrix, x: &CMatrix) -> Result<()> {
    if !a.is_square() || a.rows() != x.rows() || x.rows() != x.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", a.rows()),
            found: format!("{}x{}", x.rows(), x.cols()),
        });
    }
    Ok(())
}

fn traceless(h: &CMatrix) -> CMatrix {
    let d = h.rows();
    let shift = h.trace() / d as f64;
    let mut out = h.hermitian_part();
    for i in 0..d {
        out[(i, i)] -= shift;
    }
    out
}

impl Lindbladian {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            hamiltonian: CMatrix::zeros(dim, dim),
            dissipator: Dissipator::Jumps {
                operators: Vec::new(),
                rates: Vec::new(),
            },
        }
    }

    pub fn hamiltonian_only(h: &CMatrix) -> Result<Self> {
        Self::with_jumps(h, Vec::new(), Vec::new())
    }

    /// The stored Hamiltonian is the traceless Hermitian part of `h`.
    pub fn with_jumps(h: &CMatrix, operators: Vec<CMatrix>, rates: Vec<f64>) -> Result<Self> {
        let dim = h.rows();
        if !h.is_square() {
            return Err(Error::ShapeMismatch {
                expected: "square Hamiltonian".into(),
                found: format!("{}x{}", h.rows(), h.cols()),
            });
        }
        if operators.len() != rates.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rates", operators.len()),
                found: format!("{} rates", rates.len()),
            });
        }
        for a in &operators {
            if a.rows() != dim || a.cols() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("{dim}x{dim} jump operator"),
                    found: format!("{}x{}", a.rows(), a.cols()),
                });
            }
        }
        if !h.is_hermitian(1e-10) {
            return Err(Error::NonHermitianInput {
                deviation: h.hermiticity_deviation(),
            });
        }
        Ok(Self {
            dim,
            hamiltonian: traceless(h),
            dissipator: Dissipator::Jumps { operators, rates },
        })
    }

    pub fn with_kossakowski(h: &CMatrix, c: CMatrix) -> Result<Self> {
        let dim = h.rows();
        let n = dim * dim - 1;
        if c.rows() != n || c.cols() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n}x{n} Kossakowski matrix"),
                found: format!("{}x{}", c.rows(), c.cols()),
            });
        }
        if !c.is_hermitian(1e-10) {
            return Err(Error::NonHermitianInput {
                deviation: c.hermiticity_deviation(),
            });
        }
        if !h.is_hermitian(1e-10) {
            return Err(Error::NonHermitianInput {
                deviation: h.hermiticity_deviation(),
            });
        }
        Ok(Self {
            dim,
            hamiltonian: traceless(h),
            dissipator: Dissipator::Kossakowski(c.hermitian_part()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn dissipator(&self) -> &Dissipator {
        &self.dissipator
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        check_square_pair(&self.hamiltonian, x)?;
        let mut out = self.hamiltonian.commutator(x).scale_c(C64::new(0.0, -1.0));
        match &self.dissipator {
            Dissipator::Jumps { operators, rates } => {
                for (a, &g) in operators.iter().zip(rates) {
                    if g != 0.0 {
                        out.axpy(C64::new(g, 0.0), &dissipator_term(a, x));
                    }
                }
            }
            Dissipator::Kossakowski(c) => {
                // Σ_kl C_kl F_k X F_l = Σ_k F_k X B_k with B_k = Σ_l C_kl F_l, and
                // Σ_kl C_kl F_l F_k = Σ_k B_k F_k.
                let basis = gellmann_basis(self.dim);
                let mut anti = CMatrix::zeros(self.dim, self.dim);
                for (k, fk) in basis.iter().enumerate() {
                    let mut bk = CMatrix::zeros(self.dim, self.dim);
                    for (l, fl) in basis.iter().enumerate() {
                        let ckl = c[(k, l)];
                        if ckl != ZERO {
                            bk.axpy(ckl, fl);
                        }
                    }
                    out += &fk.matmul(x).matmul(&bk);
                    anti += &bk.matmul(fk);
                }
                out.axpy(C64::new(-0.5, 0.0), &anti.anticommutator(x));
            }
        }
        Ok(out)
    }

    pub fn to_superoperator(&self) -> Superoperator {
        Superoperator::from_map(self.dim, |x| self.apply(x).expect("shapes checked"))
    }

    pub fn gksl_validity(&self, tol: f64) -> GkslValidity {
        self.to_superoperator().gksl_validity(tol)
    }

    /// Sum of the rates weighted by the squared norms of the traceless jump
    /// parts; equals `tr C` of the Kossakowski form.
    pub fn total_rate(&self) -> f64 {
        match self.to_kossakowski_form().dissipator {
            Dissipator::Kossakowski(c) => c.trace().re,
            Dissipator::Jumps { .. } => unreachable!(),
        }
    }

    /// Kossakowski matrix `C_kl = Σ_i γ_i c_ik c̄_il` with `c_ik = tr(F_k a_i)`.
    /// Identity components of the jumps move into the Hamiltonian.
    pub fn to_kossakowski_form(&self) -> Self {
        let d = self.dim;
        let (operators, rates) = match &self.dissipator {
            Dissipator::Kossakowski(_) => return self.clone(),
            Dissipator::Jumps { operators, rates } => (operators, rates),
        };
        let basis = gellmann_basis(d);
        let n = basis.len();
        let mut c = CMatrix::zeros(n, n);
        let mut h = self.hamiltonian.clone();
        for (a, &g) in operators.iter().zip(rates) {
            let (coords, c0) = coordinates(&basis, a);
            for k in 0..n {
                for l in 0..n {
                    c[(k, l)] += coords[k] * coords[l].conj() * g;
                }
            }
            if c0 != ZERO {
                // L_a = L_{a0} − i[H', ·] with H' = (i/2)(c̄0·a0 − c0·a0†).
                let mut a0 = a.clone();
                for i in 0..d {
                    a0[(i, i)] -= c0;
                }
                let k = &a0.scale_c(c0.conj()) - &a0.adjoint().scale_c(c0);
                h.axpy(C64::new(0.0, 0.5 * g), &k);
            }
        }
        Self {
            dim: d,
            hamiltonian: traceless(&h),
            dissipator: Dissipator::Kossakowski(c.hermitian_part()),
        }
    }

    /// Diagonalizes the Kossakowski matrix: jumps are its eigenvectors expanded in
    /// the Gell-Mann basis, rates its eigenvalues. Eigenvalues down to
    /// `−1e−8·‖C‖₂` are clipped to zero; zero-rate jumps are dropped.
    pub fn to_jump_form(&self) -> Result<Self> {
        let c = match &self.dissipator {
            Dissipator::Jumps { .. } => return Ok(self.clone()),
            Dissipator::Kossakowski(c) => c,
        };
        let basis = gellmann_basis(self.dim);
        let e = eigh(c);
        let scale = e.max().abs().max(e.min().abs());
        if e.min() < -NEGATIVE_KOSSAKOWSKI_TOL * scale {
            return Err(Error::NegativeKossakowski { min_eig: e.min() });
        }
        let mut operators = Vec::new();
        let mut rates = Vec::new();
        for (m, &lambda) in e.values.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let mut a = CMatrix::zeros(self.dim, self.dim);
            for (k, f) in basis.iter().enumerate() {
                a.axpy(e.vectors[(k, m)], f);
            }
            operators.push(a);
            rates.push(lambda);
        }
        Ok(Self {
            dim: self.dim,
            hamiltonian: self.hamiltonian.clone(),
            dissipator: Dissipator::Jumps { operators, rates },
        })
    }

    /// Recovers `(H, C)` from a Hermiticity-preserving, trace-annihilating
    /// superoperator by expanding its Choi matrix in the basis
    /// `{I/√d, F_1, …}`. The Kossakowski matrix need not be PSD.
    pub fn from_superoperator(s: &Superoperator, tol: f64) -> Result<Self> {
        let d = s.dim();
        let report = s.gksl_validity(tol);
        if !report.hermiticity_preserving || !report.trace_annihilating {
            return Err(Error::NotAGenerator(format!(
                "hermiticity_preserving={}, trace_annihilating={}",
                report.hermiticity_preserving, report.trace_annihilating
            )));
        }
        let choi = s.choi();
        let mut full = vec![CMatrix::identity(d).scale(1.0 / (d as f64).sqrt())];
        full.extend(gellmann_basis(d));
        // w(A)[i·d + a] = A[a, i] makes Choi = Σ c_αβ w(F_α) w(F_β)†.
        let w: Vec<Vec<C64>> = full
            .iter()
            .map(|f| {
                let mut v = vec![ZERO; d * d];
                for i in 0..d {
                    for a in 0..d {
                        v[i * d + a] = f[(a, i)];
                    }
                }
                v
            })
            .collect();
        let m = full.len();
        let cw: Vec<Vec<C64>> = w.iter().map(|wb| choi.matrix().mul_vec(wb)).collect();
        let coeff = CMatrix::from_fn(m, m, |a, b| {
            w[a].iter().zip(&cw[b]).map(|(x, y)| x.conj() * y).sum()
        });
        let n = m - 1;
        let c = CMatrix::from_fn(n, n, |k, l| coeff[(k + 1, l + 1)]);
        let mut h = CMatrix::zeros(d, d);
        let sqrt_d = (d as f64).sqrt();
        for k in 0..n {
            h.axpy(C64::new(-coeff[(k + 1, 0)].im / sqrt_d, 0.0), &full[k + 1]);
        }
        Self::with_kossakowski(&h, c)
    }

    /// Embeds a single-site generator as `I ⊗ … ⊗ L ⊗ … ⊗ I` acting on site
    /// `site` of `n` equal registers (jump form).
    pub fn embed(&self, site: usize, n: usize) -> Result<Self> {
        if site >= n {
            return Err(Error::InvalidInput(format!(
                "site {site} out of range for {n} registers"
            )));
        }
        let jump = self.to_jump_form()?;
        let d = self.dim;
        let lift = |op: &CMatrix| {
            let mut out = CMatrix::identity(1);
            for s in 0..n {
                out = if s == site {
                    out.kron(op)
                } else {
                    out.kron(&CMatrix::identity(d))
                };
            }
            out
        };
        let (operators, rates) = match &jump.dissipator {
            Dissipator::Jumps { operators, rates } => {
                (operators.iter().map(lift).collect(), rates.clone())
            }
            Dissipator::Kossakowski(_) => unreachable!(),
        };
        Self::with_jumps(&lift(&jump.hamiltonian), operators, rates)
    }

    /// Sum of generators in jump form (Hamiltonians add, jump lists concatenate).
    pub fn sum(parts: &[Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("empty generator sum".into()))?;
        let mut h = CMatrix::zeros(first.dim, first.dim);
        let mut ops = Vec::new();
        let mut rates = Vec::new();
        for p in parts {
            let j = p.to_jump_form()?;
            h += &j.hamiltonian;
            if let Dissipator::Jumps {
                operators,
                rates: r,
            } = j.dissipator
            {
                ops.extend(operators);
                rates.extend(r);
            }
        }
        Self::with_jumps(&h, ops, rates)
    }

    /// Largest |eigenvalue| of the Kossakowski matrix.
    pub fn kossakowski_norm(&self) -> f64 {
        match self.to_kossakowski_form().dissipator {
            Dissipator::Kossakowski(c) => hermitian_norm2(&c),
            Dissipator::Jumps { .. } => unreachable!(),
        }
    }
}
