//! Density-matrix paths: sampling with derivatives, rank tracking,
//! piecewise-affine interpolation and tensor-product paths.

mod rank;
mod trajectory;

use std::sync::Arc;

pub use rank::{rank_profile, FrameWarning, RankProfile, CONTINUITY_OVERLAP};
pub use trajectory::{EvalFn, Source, Trajectory, DEFAULT_H, SAMPLE_TOL};

use crate::error::{Error, Result};
use crate::matcore::eig::trace_norm;
use crate::matcore::{CMatrix, DensityMatrix};

/// Largest number of qubit registers accepted by [`product_path`].
pub const MAX_REGISTERS: usize = 3;
const AFFINE_SUBCELLS: usize = 16;

/// Piecewise-affine interpolant `ρ_t` with `ρ_{t_k} = σ_k`.
pub fn piecewise_affine_from_points(states: &[CMatrix], times: &[f64]) -> Result<Trajectory> {
    Trajectory::piecewise_affine(states.to_vec(), times.to_vec())
}

/// Interpolates `traj` through its samples on `knots` and estimates
/// `∫ ‖ρ_t − η_t‖_1 dt` by the trapezoid rule on 16 subcells per knot cell.
pub fn affine_approximation(traj: &Trajectory, knots: &[f64]) -> Result<(Trajectory, f64)> {
    let states = knots
        .iter()
        .map(|&t| traj.state(t).map(DensityMatrix::into_inner))
        .collect::<Result<Vec<_>>>()?;
    let eta = Trajectory::piecewise_affine(states, knots.to_vec())?;
    let mut error = 0.0;
    for w in knots.windows(2) {
        let h = (w[1] - w[0]) / AFFINE_SUBCELLS as f64;
        let gap = |t: f64| -> Result<f64> { Ok(trace_norm(&(&*traj.state(t)? - &*eta.state(t)?))) };
        let mut prev = gap(w[0])?;
        for j in 1..=AFFINE_SUBCELLS {
            let t = if j == AFFINE_SUBCELLS {
                w[1]
            } else {
                w[0] + j as f64 * h
            };
            let next = gap(t)?;
            error += 0.5 * h * (prev + next);
            prev = next;
        }
    }
    Ok((eta, error))
}

/// `⊗_i ρ_{i,t}` with factor `i` equal to `base` for `i ∈ subset` (0-based
/// register indices) and to `asymptote` otherwise. Derivatives follow the
/// product rule using the base trajectory's derivative.
pub fn product_path(
    base: &Trajectory,
    asymptote: &DensityMatrix,
    subset: &[usize],
    n: usize,
) -> Result<Trajectory> {
    if n == 0 || n > MAX_REGISTERS {
        return Err(Error::DimensionCap {
            dim: 1usize << n.min(16),
            cap: 1 << MAX_REGISTERS,
        });
    }
    if base.dim() != 2 || asymptote.dim() != 2 {
        return Err(Error::InvalidInput(
            "product paths require qubit factors".into(),
        ));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!(
            "register {bad} out of range for {n} registers"
        )));
    }
    let mask: Vec<bool> = (0..n).map(|i| subset.contains(&i)).collect();
    let base = base.clone();
    let frozen = asymptote.as_matrix().clone();
    let (t0, t1) = base.interval();
    let f = move |t: f64| {
        let (rho, v) = match base.sample_with_derivative(t, DEFAULT_H) {
            Ok((rho, v)) => (rho.into_inner(), v.into_inner()),
            Err(_) => (CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)),
        };
        let factor = |i: usize| if mask[i] { &rho } else { &frozen };
        let mut state = CMatrix::identity(1);
        for i in 0..n {
            state = state.kron(factor(i));
        }
        let mut deriv = CMatrix::zeros(1 << n, 1 << n);
        for j in (0..n).filter(|&j| mask[j]) {
            let mut term = CMatrix::identity(1);
            for i in 0..n {
                term = term.kron(if i == j { &v } else { factor(i) });
            }
            deriv += &term;
        }
        (state, Some(deriv))
    };
    Trajectory::analytic(1 << n, t0, t1, Arc::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::pauli;

    fn knots() -> (Vec<CMatrix>, Vec<f64>) {
        (
            vec![
                CMatrix::diag(&[1.0, 0.0]),
                CMatrix::diag(&[0.25, 0.75]),
                CMatrix::diag(&[0.5, 0.5]),
            ],
            vec![0.0, 1.0, 3.0],
        )
    }

    #[test]
    fn knots_reproduced_and_midpoint_is_average() {
        let (s, t) = knots();
        let traj = piecewise_affine_from_points(&s, &t).unwrap();
        for (sk, &tk) in s.iter().zip(&t) {
            assert_eq!(traj.state(tk).unwrap().as_matrix(), sk);
        }
        let mid = traj.state(2.0).unwrap();
        assert!(mid.distance(&CMatrix::diag(&[0.375, 0.625])) < 1e-15);
        let (_, v) = traj.sample_with_derivative(2.0, DEFAULT_H).unwrap();
        assert!(v.distance(&CMatrix::diag(&[0.125, -0.125])) < 1e-15);
    }

    #[test]
    fn identical_knots_give_constant_path() {
        let s = vec![CMatrix::diag(&[0.3, 0.7]); 2];
        let traj = piecewise_affine_from_points(&s, &[0.0, 1.0]).unwrap();
        let (_, v) = traj.sample_with_derivative(0.5, DEFAULT_H).unwrap();
        assert_eq!(v.frobenius_norm(), 0.0);
    }

    #[test]
    fn affine_input_is_reproduced() {
        let (s, t) = knots();
        let traj = piecewise_affine_from_points(&s, &t).unwrap();
        let (_, err) = affine_approximation(&traj, &[0.0, 0.5, 1.0, 2.0, 3.0]).unwrap();
        assert!(err <= 1e-12);
    }

    #[test]
    fn product_path_factors() {
        let base = piecewise_affine_from_points(
            &[CMatrix::diag(&[1.0, 0.0]), CMatrix::diag(&[0.0, 1.0])],
            &[0.0, 1.0],
        )
        .unwrap();
        let inf = DensityMatrix::maximally_mixed(2);

        let p = product_path(&base, &inf, &[], 2).unwrap();
        let (rho, v) = p.sample_with_derivative(0.3, DEFAULT_H).unwrap();
        assert!(rho.distance(&CMatrix::identity(4).scale(0.25)) < 1e-15);
        assert_eq!(v.frobenius_norm(), 0.0);

        let p = product_path(&base, &inf, &[0], 2).unwrap();
        let (rho, v) = p.sample_with_derivative(0.25, DEFAULT_H).unwrap();
        let r = CMatrix::diag(&[0.75, 0.25]);
        assert!(rho.distance(&r.kron(inf.as_matrix())) < 1e-15);
        assert!(v.distance(&pauli::z().scale(-1.0).kron(inf.as_matrix())) < 1e-15);

        let p = product_path(&base, &inf, &[0], 1).unwrap();
        assert!(p.state(0.25).unwrap().distance(&r) < 1e-15);

        assert!(matches!(
            product_path(&base, &inf, &[0], 4),
            Err(Error::DimensionCap { .. })
        ));
    }
}
