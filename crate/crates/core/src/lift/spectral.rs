use super::family::{EpsilonPolicy, Generator, LiftFamily, PointDiagnostics};
use super::real::{flatten, nnls, RealMatrix};
use super::replacer::{max_feasible_epsilon, replacer_generator};
use crate::error::{Error, Result};
use crate::gksl::{dissipator_apply, Lindbladian};
use crate::matcore::eig::eigh;
use crate::matcore::{CMatrix, C64};
use crate::paths::{Trajectory, DEFAULT_H};

/// Residual bound a spectral generator must meet.
pub const SPECTRAL_RESIDUAL_TOL: f64 = 1e-8;

/// Generator with `L(ρ) = v` built in the eigenframe of `ρ`.
///
/// With `ρ = diag(ρ₁₁, 0)` and `v` split into blocks `x₁₁, x₁₂, x₂₂`:
/// the kernel block is produced by jumps `|w_m⟩⟨u|ρ₁₁^{−1/2}` from the top
/// support vector `u` into the eigenvectors `w_m` of `x₂₂` (rates = the
/// eigenvalues), the off-diagonal block by the Hamiltonian with off-diagonal
/// block `−iρ₁₁^{−1}x₁₂`, and what remains on the support by a replacer-type
/// generator acting only there. Full-rank states reduce to the adaptive
/// replacer. If the residual exceeds 1e−8 the rates are refitted by NNLS.
pub fn spectral_generator(
    rho: &CMatrix,
    v: &CMatrix,
    rank_tol: f64,
    t: Option<f64>,
) -> Result<Lindbladian> {
    let d = rho.rows();
    let e = eigh(rho);
    let r = e.values.iter().filter(|&&x| x > rank_tol).count();
    if r == d || r == 0 {
        let g = replacer_generator(rho, v, t.unwrap_or(0.0), EpsilonPolicy::Adaptive)?;
        return Ok(g.to_lindbladian());
    }
    let u = &e.vectors;
    let ud = u.adjoint();
    let x = ud.matmul(v).matmul(u).hermitian_part();
    let x11 = x.block(0, r, 0, r);
    let x22 = x.block(r, d, r, d);
    let e22 = eigh(&x22);
    if e22.min() < -rank_tol {
        return Err(Error::NotInTangentCone {
            t,
            kernel_min_eig: e22.min(),
        });
    }

    let to_lab = |a: &CMatrix| u.matmul(a).matmul(&ud);
    let mut ops = Vec::new();
    let mut rates = Vec::new();

    let lambda_top = e.values[0];
    let mut kernel_rate = 0.0;
    for (m, &mu) in e22.values.iter().enumerate() {
        if mu <= 0.0 {
            continue;
        }
        let mut a = CMatrix::zeros(d, d);
        for i in 0..d - r {
            a[(r + i, 0)] = e22.vectors[(i, m)] / lambda_top.sqrt();
        }
        ops.push(to_lab(&a));
        rates.push(mu);
        kernel_rate += mu;
    }

    let mut h = CMatrix::zeros(d, d);
    for i in 0..r {
        for j in r..d {
            let hij = C64::new(0.0, -1.0) * x[(i, j)] / e.values[i];
            h[(i, j)] = hij;
            h[(j, i)] = hij.conj();
        }
    }

    let mut y = x11.clone();
    y[(0, 0)] += C64::new(kernel_rate, 0.0);
    if y.frobenius_norm() > 1e-14 {
        let rho11 = CMatrix::diag(&e.values[..r]);
        let tau = rho11.trace().re;
        let emax = max_feasible_epsilon(&rho11, &y);
        let eps = (0.5 * emax).min(1.0);
        let mut sigma = rho11.clone();
        sigma.axpy(C64::new(eps, 0.0), &y);
        let es = eigh(&sigma);
        for (j, &s) in es.values.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            for k in 0..r {
                let mut a = CMatrix::zeros(d, d);
                for i in 0..r {
                    a[(i, k)] = es.vectors[(i, j)];
                }
                ops.push(to_lab(&a));
                rates.push(s / (eps * tau));
            }
        }
    }

    let h_lab = to_lab(&h).hermitian_part();
    let mut l = Lindbladian::with_jumps(&h_lab, ops.clone(), rates.clone())?;
    let mut residual = l.apply(rho)?.distance(v);
    if residual > SPECTRAL_RESIDUAL_TOL && !ops.is_empty() {
        log::debug!("spectral construction residual {residual:.3e}; refitting rates");
        let ham = l.hamiltonian().commutator(rho).scale_c(C64::new(0.0, -1.0));
        let target = flatten(&(v - &ham));
        let cols = ops
            .iter()
            .map(|a| Ok(flatten(&dissipator_apply(a, rho)?)))
            .collect::<Result<Vec<_>>>()?;
        let a = RealMatrix::from_columns(2 * d * d, cols);
        let fitted = nnls(&a, &target, &rates, 20_000);
        l = Lindbladian::with_jumps(&h_lab, ops, fitted)?;
        residual = l.apply(rho)?.distance(v);
    }
    if residual > SPECTRAL_RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge { t, residual });
    }
    Ok(l)
}

/// Spectral lift on `grid`; generators in jump form with nonnegative rates.
pub fn spectral_lift(traj: &Trajectory, grid: &[f64], rank_tol: f64) -> Result<LiftFamily> {
    let mut generators = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());
    for &t in grid {
        let (rho, v) = traj.sample_with_derivative(t, DEFAULT_H)?;
        let g = Generator::Lindblad(spectral_generator(&rho, &v, rank_tol, Some(t))?);
        diagnostics.push(PointDiagnostics::evaluate(t, &g, &rho, &v)?);
        generators.push(g);
    }
    LiftFamily::new(traj.dim(), grid.to_vec(), generators, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gksl::{Dissipator, VALIDITY_TOL};
    use crate::matcore::{RANK_TOL, ZERO};
    use std::sync::Arc;

    #[test]
    fn decay_tangent_at_pure_state() {
        let rho = CMatrix::diag(&[1.0, 0.0]);
        let v = CMatrix::diag(&[-1.0, 1.0]);
        let l = spectral_generator(&rho, &v, RANK_TOL, None).unwrap();
        assert!(l.apply(&rho).unwrap().distance(&v) <= 1e-12);
        match l.dissipator() {
            Dissipator::Jumps { operators, rates } => {
                assert_eq!(operators.len(), 1);
                assert!(operators[0].distance(&CMatrix::unit(2, 1, 0)) < 1e-15);
                assert!((rates[0] - 1.0).abs() < 1e-15);
            }
            _ => panic!("expected jump form"),
        }
    }

    #[test]
    fn outward_tangent_rejected() {
        let err = spectral_generator(
            &CMatrix::diag(&[1.0, 0.0]),
            &CMatrix::diag(&[1.0, -1.0]),
            RANK_TOL,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotInTangentCone { .. }));
    }

    #[test]
    fn rank_deficient_qutrit_with_coherences() {
        let psi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8), ZERO];
        let rho = &CMatrix::outer(&psi, &psi).scale(0.7) + &CMatrix::diag(&[0.0, 0.0, 0.3]);
        // Weight flows into the kernel vector k, plus support coherences.
        let mut v = CMatrix::zeros(3, 3);
        v[(0, 2)] = C64::new(0.1, 0.05);
        v[(2, 0)] = C64::new(0.1, -0.05);
        let k = [C64::new(0.8, 0.0), C64::new(0.0, -0.6), ZERO];
        v += &CMatrix::outer(&k, &k).scale(0.2);
        v[(2, 2)] -= C64::new(0.2, 0.0);
        let l = spectral_generator(&rho, &v, RANK_TOL, None).unwrap();
        assert!(l.apply(&rho).unwrap().distance(&v) <= 1e-10);
        assert!(l.gksl_validity(VALIDITY_TOL).valid);
    }

    #[test]
    fn full_rank_diagonal_path() {
        let traj = Trajectory::analytic(
            2,
            0.0,
            1.0,
            Arc::new(|t| {
                (
                    CMatrix::diag(&[0.75 - t / 4.0, 0.25 + t / 4.0]),
                    Some(CMatrix::diag(&[-0.25, 0.25])),
                )
            }),
        )
        .unwrap();
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let fam = spectral_lift(&traj, &grid, RANK_TOL).unwrap();
        assert!(fam.max_residual() <= 1e-10);
        assert!(fam.all_valid());
    }
}
