use super::family::{EpsilonPolicy, Generator, LiftFamily, PointDiagnostics};
use crate::error::{Error, Result};
use crate::matcore::eig::{eigenspace, eigh};
use crate::matcore::{CMatrix, C64, RANK_TOL};
use crate::paths::{Trajectory, DEFAULT_H};

const EPS_BRACKET_CAP: f64 = 1e12;
const EPS_REL_TOL: f64 = 1e-12;
const EPS_MAX_ITER: usize = 200;
const PSD_SLACK: f64 = 1e-14;
/// Eigenvalues of `ρ` at or below this are candidates for the kernel shortcut
/// in [`max_feasible_epsilon`].
const NULL_EIG: f64 = 1e-13;
/// Velocities with `‖v‖_F` at or below this count as zero.
const ZERO_VELOCITY: f64 = 1e-14;
/// First-order crossing estimates `λ/|⟨x|v|x⟩|` below this count as zero.
const NULL_EPS: f64 = 1e-9;

/// Smallest eigenvalue of the compression of `v` onto the kernel of `rho`
/// (eigenvalues at most `rank_tol`); `+∞` when `rho` has full rank.
pub fn kernel_compression_min(rho: &CMatrix, v: &CMatrix, rank_tol: f64) -> f64 {
    let e = eigh(rho);
    let k = eigenspace(&e, |x| x <= rank_tol);
    if k.cols() == 0 {
        return f64::INFINITY;
    }
    eigh(&k.adjoint().matmul(v).matmul(&k).hermitian_part()).min()
}

/// Smallest first-order crossing `λ_k/(−⟨x_k|v|x_k⟩)` over the near-null
/// eigenpairs of `ρ` along which `v` points outward.
fn kernel_crossing(rho: &CMatrix, v: &CMatrix) -> f64 {
    let vnorm = v.frobenius_norm();
    let e = eigh(rho);
    let mut best = f64::INFINITY;
    for (k, &lambda) in e.values.iter().enumerate() {
        if lambda > NULL_EIG {
            continue;
        }
        let x = e.vector(k);
        let vx = v.mul_vec(&x);
        let c: f64 = x.iter().zip(&vx).map(|(a, b)| (a.conj() * b).re).sum();
        if c < -1e-12 * vnorm {
            best = best.min(lambda.max(0.0) / -c);
        }
    }
    let k = kernel_compression_min(rho, v, 0.0);
    if k < -1e-12 * vnorm {
        best = 0.0;
    }
    best
}

/// Largest `ε` with `ρ + εv ⪰ 0`: `+∞` when no eigenvalue ever crosses zero
/// or `v` is at rounding level, `0` when `v` points out of the cone on the null space of `ρ`, otherwise the
/// crossing found by bisection on `λ_min(ρ + εv)` to relative tolerance 1e−12.
pub fn max_feasible_epsilon(rho: &CMatrix, v: &CMatrix) -> f64 {
    let vnorm = v.frobenius_norm();
    if vnorm <= ZERO_VELOCITY {
        return f64::INFINITY;
    }
    if kernel_crossing(rho, v) < NULL_EPS {
        return 0.0;
    }
    let feasible = |eps: f64| {
        let mut m = rho.clone();
        m.axpy(C64::new(eps, 0.0), v);
        eigh(&m).min() >= -PSD_SLACK * (1.0 + eps * vnorm)
    };
    if !feasible(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > EPS_BRACKET_CAP {
            return f64::INFINITY;
        }
    }
    for _ in 0..EPS_MAX_ITER {
        if hi - lo <= EPS_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Replacer generator `(1/ε)(R_{ρ+εv} − id)` at one point. The adaptive
/// policy fails with `NotInTangentCone` when `ε_max = 0`.
pub fn replacer_generator(
    rho: &CMatrix,
    v: &CMatrix,
    t: f64,
    policy: EpsilonPolicy,
) -> Result<Generator> {
    let epsilon = match policy {
        EpsilonPolicy::Constant(e) => e,
        EpsilonPolicy::PaperLiteral => EpsilonPolicy::literal_epsilon(t),
        EpsilonPolicy::Adaptive => {
            let emax = max_feasible_epsilon(rho, v);
            if emax == 0.0 {
                return Err(Error::NotInTangentCone {
                    t: Some(t),
                    kernel_min_eig: kernel_compression_min(rho, v, RANK_TOL),
                });
            }
            (0.5 * emax).min(1.0)
        }
    };
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Ok(Generator::zero(rho.rows()));
    }
    let mut sigma = rho.clone();
    sigma.axpy(C64::new(epsilon, 0.0), v);
    Ok(Generator::Replacer {
        sigma: sigma.hermitian_part(),
        epsilon,
    })
}

/// Replacer lift `L_t = (1/ε_t)(R_{ρ_t + ε_t ρ̇_t} − id)` on `grid`.
///
/// The literal policy never fails: points where `ε_t` underflows to zero carry
/// the zero generator and their full residual `‖ρ̇_t‖`.
pub fn replacer_lift(traj: &Trajectory, grid: &[f64], policy: EpsilonPolicy) -> Result<LiftFamily> {
    let mut generators = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());
    for &t in grid {
        let (rho, v) = traj.sample_with_derivative(t, DEFAULT_H)?;
        let g = replacer_generator(&rho, &v, t, policy)?;
        let mut diag = PointDiagnostics::evaluate(t, &g, &rho, &v)?;
        if matches!(g, Generator::Lindblad(_)) {
            diag.epsilon = Some(0.0);
        }
        diagnostics.push(diag);
        generators.push(g);
    }
    LiftFamily::new(traj.dim(), grid.to_vec(), generators, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::pauli;

    #[test]
    fn epsilon_max_examples() {
        let e = max_feasible_epsilon(&CMatrix::diag(&[0.5, 0.5]), &CMatrix::diag(&[0.5, -0.5]));
        assert!((e - 1.0).abs() <= 1e-11);
        assert_eq!(
            max_feasible_epsilon(&CMatrix::diag(&[0.5, 0.5]), &CMatrix::zeros(2, 2)),
            f64::INFINITY
        );
        assert_eq!(
            max_feasible_epsilon(&CMatrix::diag(&[1.0, 0.0]), &CMatrix::diag(&[1.0, -1.0])),
            0.0
        );
    }

    #[test]
    fn inward_direction_at_pure_state() {
        let e = max_feasible_epsilon(&CMatrix::diag(&[1.0, 0.0]), &CMatrix::diag(&[-1.0, 1.0]));
        assert!((e - 1.0).abs() <= 1e-11);
    }

    #[test]
    fn sin_dephasing_crossing() {
        let t: f64 = 0.7;
        let rho = CMatrix::real(&[&[0.5, 0.5 * t.sin()], &[0.5 * t.sin(), 0.5]]);
        let v = pauli::x().scale(0.5 * t.cos());
        let expected = (1.0 - t.sin()) / t.cos();
        assert!((max_feasible_epsilon(&rho, &v) - expected).abs() <= 1e-11 * expected);
    }

    #[test]
    fn literal_epsilon_underflow_gives_zero_generator() {
        let rho = CMatrix::diag(&[0.5, 0.5]);
        let g = replacer_generator(
            &rho,
            &CMatrix::diag(&[0.1, -0.1]),
            1.0,
            EpsilonPolicy::PaperLiteral,
        )
        .unwrap();
        assert_eq!(g, Generator::zero(2));
    }
}
