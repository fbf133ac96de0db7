//! Time-ordered integration of generator families and end-to-end lift
//! verification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gksl::Superoperator;
use crate::lift::LiftFamily;
use crate::matcore::{CMatrix, C64};
use crate::paths::{Trajectory, DEFAULT_H};

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Choi eigenvalues of a step propagator above `−CP_TOL` count as positive.
pub const CP_TOL: f64 = 1e-8;
/// Per-step renormalization beyond this is logged as a warning.
pub const RENORM_WARN: f64 = 1e-8;
/// Relative offset at which left limits are sampled in [`verify_lift`].
/// Relative step difference below which a cached propagator is reused.
const STEP_MATCH: f64 = 1e-12;
const LEFT_LIMIT_OFFSET: f64 = 1e-9;

/// Result of integrating a family with both steppers.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub times: Vec<f64>,
    /// Exponential-midpoint states.
    pub exponential: Vec<CMatrix>,
    /// Runge–Kutta states.
    pub rk4: Vec<CMatrix>,
    /// `max_k ‖ρ^exp_k − ρ^rk4_k‖_F`.
    pub max_disagreement: f64,
    /// Largest `|tr X − 1|` seen before renormalization.
    pub max_trace_drift: f64,
    /// Largest `‖X − renormalized(X)‖_F` over all steps.
    pub max_renormalization: f64,
}

impl Evolution {
    /// The exponential-stepper states as a grid trajectory.
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::from_grid(self.times.clone(), self.exponential.clone(), None)
    }

    pub fn final_state(&self) -> &CMatrix {
        self.exponential
            .last()
            .expect("evolution has at least two points")
    }
}

/// Piecewise-affine superoperator family `t ↦ S_t`.
struct Schedule {
    times: Vec<f64>,
    ops: Vec<Superoperator>,
}

impl Schedule {
    fn new(family: &LiftFamily) -> Self {
        Self {
            times: family.times().to_vec(),
            ops: family.superoperators(),
        }
    }

    /// Nondegenerate cell containing `t`; at a repeated time this is the cell
    /// to the right, and the last cell is closed.
    fn cell(&self, t: f64) -> usize {
        let n = self.times.len();
        let k = self.times.partition_point(|&s| s <= t);
        let mut c = k.saturating_sub(1).min(n - 2);
        while c > 0 && self.times[c + 1] <= self.times[c] {
            c -= 1;
        }
        c
    }

    /// `S_t` evaluated within `cell`, so that left and right limits at a
    /// repeated time are both reachable.
    fn at(&self, t: f64, cell: usize) -> Superoperator {
        if self.ops.len() == 1 {
            return self.ops[0].clone();
        }
        let (a, b) = (self.times[cell], self.times[cell + 1]);
        if b <= a {
            return self.ops[cell + 1].clone();
        }
        let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
        if w == 0.0 || self.ops[cell] == self.ops[cell + 1] {
            self.ops[cell].clone()
        } else if w == 1.0 {
            self.ops[cell + 1].clone()
        } else {
            self.ops[cell].lerp(&self.ops[cell + 1], w)
        }
    }

    fn covers(&self, t0: f64, t1: f64) -> bool {
        if self.ops.len() == 1 {
            return true;
        }
        let slack = 1e-12
            * (1.0
                + self.times[0]
                    .abs()
                    .max(self.times[self.times.len() - 1].abs()));
        t0 >= self.times[0] - slack && t1 <= self.times[self.times.len() - 1] + slack
    }
}

/// Re-Hermitizes and renormalizes the trace in place; returns the trace drift
/// before correction and the size of the correction.
fn renormalize(x: &mut CMatrix) -> (f64, f64) {
    let drift = (x.trace() - C64::new(1.0, 0.0)).norm();
    let mut y = x.hermitian_part();
    let tr = y.trace().re;
    if tr.abs() > f64::MIN_POSITIVE {
        y = y.scale(1.0 / tr);
    }
    let change = y.distance(x);
    *x = y;
    (drift, change)
}

fn apply_vec(s: &Superoperator, x: &[C64]) -> Vec<C64> {
    s.matrix().mul_vec(x)
}

fn combine(x: &[C64], terms: &[(f64, &[C64])]) -> Vec<C64> {
    let mut out = x.to_vec();
    for (w, v) in terms {
        for (o, vi) in out.iter_mut().zip(v.iter()) {
            *o += vi * w;
        }
    }
    out
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::GridMismatch(
            "integration grid needs at least two points".into(),
        ));
    }
    if let Some(k) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonIncreasingTimes { index: k + 1 });
    }
    Ok(())
}

/// Integrates `ρ̇ = L_t(ρ)` from `ρ0` at `grid[0]` with an exponential
/// midpoint stepper and with classical RK4, the generator interpolated
/// affinely between family points. States are Hermitized and trace
/// renormalized after every step.
pub fn evolve(family: &LiftFamily, rho0: &CMatrix, grid: &[f64]) -> Result<Evolution> {
    check_grid(grid)?;
    let d = family.dim();
    if rho0.rows() != d || rho0.cols() != d {
        return Err(Error::ShapeMismatch {
            expected: format!("{d}x{d}"),
            found: format!("{}x{}", rho0.rows(), rho0.cols()),
        });
    }
    let schedule = Schedule::new(family);
    if !schedule.covers(grid[0], grid[grid.len() - 1]) {
        return Err(Error::GridMismatch(format!(
            "grid [{}, {}] outside family range [{}, {}]",
            grid[0],
            grid[grid.len() - 1],
            family.times()[0],
            family.times()[family.len() - 1]
        )));
    }

    let mut exp_state = rho0.clone();
    let mut rk_state = rho0.clone();
    let mut exponential = vec![exp_state.clone()];
    let mut rk4 = vec![rk_state.clone()];
    let mut max_trace_drift: f64 = 0.0;
    let mut max_renormalization: f64 = 0.0;
    let mut max_disagreement: f64 = 0.0;
    let mut cached: Option<(Superoperator, f64, Superoperator)> = None;

    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        let mid = 0.5 * (a + b);
        let cell = if schedule.ops.len() == 1 {
            0
        } else {
            schedule.cell(mid)
        };

        let s_mid = schedule.at(mid, cell);
        let prop = match &cached {
            Some((s, dt, p)) if (dt - h).abs() <= STEP_MATCH * h && s == &s_mid => p.clone(),
            _ => {
                let p = s_mid.exp(h);
                cached = Some((s_mid.clone(), h, p.clone()));
                p
            }
        };
        let mut next = CMatrix::unvectorize(&apply_vec(&prop, &exp_state.vectorize()), d);
        let (drift, change) = renormalize(&mut next);
        max_trace_drift = max_trace_drift.max(drift);
        max_renormalization = max_renormalization.max(change);
        exp_state = next;

        let (s_a, s_b) = (schedule.at(a, cell), schedule.at(b, cell));
        let x = rk_state.vectorize();
        let k1 = apply_vec(&s_a, &x);
        let k2 = apply_vec(&s_mid, &combine(&x, &[(0.5 * h, &k1)]));
        let k3 = apply_vec(&s_mid, &combine(&x, &[(0.5 * h, &k2)]));
        let k4 = apply_vec(&s_b, &combine(&x, &[(h, &k3)]));
        let y = combine(
            &x,
            &[
                (h / 6.0, &k1),
                (h / 3.0, &k2),
                (h / 3.0, &k3),
                (h / 6.0, &k4),
            ],
        );
        let mut next = CMatrix::unvectorize(&y, d);
        let (drift, change) = renormalize(&mut next);
        max_trace_drift = max_trace_drift.max(drift);
        max_renormalization = max_renormalization.max(change);
        rk_state = next;

        if change > RENORM_WARN {
            log::warn!("renormalization {change:.3e} in step [{a}, {b}]");
        }
        max_disagreement = max_disagreement.max(exp_state.distance(&rk_state));
        exponential.push(exp_state.clone());
        rk4.push(rk_state.clone());
    }

    Ok(Evolution {
        times: grid.to_vec(),
        exponential,
        rk4,
        max_disagreement,
        max_trace_drift,
        max_renormalization,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpStep {
    pub choi_min_eig: f64,
    pub cp: bool,
}

/// Complete positivity of the step propagator `exp(δS)`.
pub fn cp_step_check(s: &Superoperator, delta: f64) -> Result<CpStep> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "step must be nonnegative, got {delta}"
        )));
    }
    let choi_min_eig = s.exp(delta).choi().min_eig();
    Ok(CpStep {
        choi_min_eig,
        cp: choi_min_eig >= -CP_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub max_residual: f64,
    pub max_traj_deviation: f64,
    pub all_steps_cp: bool,
    pub max_step_choi_negativity: f64,
    pub grid_step: f64,
}

/// Family grid with each cell split into `⌈Δ/δ⌉` equal steps. Repeated
/// times are kept once.
pub fn refine_grid(times: &[f64], delta: f64) -> Vec<f64> {
    let mut out = vec![times[0]];
    for w in times.windows(2) {
        let span = w[1] - w[0];
        if span <= 0.0 {
            continue;
        }
        let n = ((span / delta) - 1e-9).ceil().max(1.0) as usize;
        out.extend((1..=n).map(|k| {
            if k == n {
                w[1]
            } else {
                w[0] + span * k as f64 / n as f64
            }
        }));
    }
    out
}

/// Checks that `family` lifts `traj`: pointwise residuals at the family
/// times (left limits just before a repeated time), the deviation of the
/// integrated state from `traj` on the family grid refined to step `delta`,
/// and complete positivity of `exp(δL_t)` at every family point.
pub fn verify_lift(traj: &Trajectory, family: &LiftFamily, delta: f64) -> Result<VerifyReport> {
    verify_lift_series(traj, family, delta).map(|(report, _)| report)
}

/// [`verify_lift`] together with the `(t, deviation)` series of the
/// integrated state.
pub fn verify_lift_series(
    traj: &Trajectory,
    family: &LiftFamily,
    delta: f64,
) -> Result<(VerifyReport, Vec<(f64, f64)>)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "step must be positive, got {delta}"
        )));
    }
    let times = family.times();
    let mut max_residual: f64 = 0.0;
    for (k, g) in family.generators().iter().enumerate() {
        // The first of a repeated time is a left limit.
        let mut t = times[k];
        if times.get(k + 1) == Some(&t) {
            t = (t - LEFT_LIMIT_OFFSET * (1.0 + t.abs())).max(traj.interval().0);
        }
        let (rho, v) = traj.sample_with_derivative(t, DEFAULT_H)?;
        max_residual = max_residual.max(g.apply(&rho)?.distance(&v));
    }

    let mut min_eig = f64::INFINITY;
    let mut previous: Option<Superoperator> = None;
    for s in family.superoperators() {
        if previous.as_ref() == Some(&s) {
            continue;
        }
        min_eig = min_eig.min(cp_step_check(&s, delta)?.choi_min_eig);
        previous = Some(s);
    }

    let grid = if family.len() == 1 {
        let (t0, t1) = traj.interval();
        refine_grid(&[t0, t1], delta)
    } else {
        refine_grid(times, delta)
    };
    let rho0 = traj.state(grid[0])?.into_inner();
    let evolution = evolve(family, &rho0, &grid)?;
    let mut series = Vec::with_capacity(grid.len());
    let mut max_traj_deviation: f64 = 0.0;
    for (t, x) in grid.iter().zip(&evolution.exponential) {
        let dev = x.distance(traj.state(*t)?.as_matrix());
        max_traj_deviation = max_traj_deviation.max(dev);
        series.push((*t, dev));
    }

    let report = VerifyReport {
        max_residual,
        max_traj_deviation,
        all_steps_cp: min_eig >= -CP_TOL,
        max_step_choi_negativity: (-min_eig).max(0.0),
        grid_step: delta,
    };
    Ok((report, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gksl::Lindbladian;
    use crate::lift::{replacer_lift, EpsilonPolicy, Generator, PointDiagnostics};
    use crate::matcore::pauli;
    use std::sync::Arc;

    fn constant(g: Generator, t0: f64, t1: f64) -> LiftFamily {
        let d = g.dim();
        let rho = CMatrix::identity(d).scale(1.0 / d as f64);
        let diag = |t| PointDiagnostics::evaluate(t, &g, &rho, &CMatrix::zeros(d, d)).unwrap();
        LiftFamily::new(
            d,
            vec![t0, t1],
            vec![g.clone(), g.clone()],
            vec![diag(t0), diag(t1)],
        )
        .unwrap()
    }

    fn uniform(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|k| t0 + (t1 - t0) * k as f64 / n as f64)
            .collect()
    }

    #[test]
    fn zero_family_is_stationary() {
        let fam = constant(Generator::zero(2), 0.0, 1.0);
        let rho = CMatrix::real(&[&[0.7, 0.2], &[0.2, 0.3]]);
        let ev = evolve(&fam, &rho, &uniform(0.0, 1.0, 10)).unwrap();
        assert!(ev.final_state().distance(&rho) <= 1e-15);
    }

    #[test]
    fn replacer_relaxation_closed_form() {
        let sigma = CMatrix::diag(&[0.8, 0.2]);
        let fam = constant(
            Generator::Replacer {
                sigma: sigma.clone(),
                epsilon: 1.0,
            },
            0.0,
            1.0,
        );
        let rho0 = CMatrix::real(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let ln2 = std::f64::consts::LN_2;
        let ev = evolve(&fam, &rho0, &uniform(0.0, ln2, 700)).unwrap();
        let expected = &sigma + &(&rho0 - &sigma).scale(0.5);
        assert!(ev.final_state().distance(&expected) <= 1e-8);
        assert!(ev.rk4.last().unwrap().distance(&expected) <= 1e-8);
    }

    #[test]
    fn hamiltonian_rotation_phase() {
        let l = Lindbladian::hamiltonian_only(&pauli::z().scale(0.5)).unwrap();
        let fam = constant(Generator::Lindblad(l), 0.0, 2.0);
        let rho0 = CMatrix::real(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let ev = evolve(&fam, &rho0, &uniform(0.0, 2.0, 2000)).unwrap();
        for (t, x) in ev.times.iter().zip(&ev.exponential) {
            assert!((x[(0, 1)] - C64::from_polar(0.5, -t)).norm() <= 1e-10);
            assert!((x[(0, 0)].re - 0.5).abs() <= 1e-12);
        }
        assert!(ev.max_disagreement <= 1e-10);
    }

    #[test]
    fn amplitude_damping_verifies() {
        let traj = Trajectory::analytic(
            2,
            0.0,
            3.0,
            Arc::new(|t: f64| {
                let p = (-t).exp();
                let c = 0.5 * (-t / 2.0).exp();
                let rho = CMatrix::real(&[&[p * 0.5, c], &[c, 1.0 - 0.5 * p]]);
                let v = CMatrix::real(&[&[-0.5 * p, -0.5 * c], &[-0.5 * c, 0.5 * p]]);
                (rho, Some(v))
            }),
        )
        .unwrap();
        let l = Lindbladian::with_jumps(
            &CMatrix::zeros(2, 2),
            vec![CMatrix::unit(2, 1, 0)],
            vec![1.0],
        )
        .unwrap();
        let times = uniform(0.0, 3.0, 30);
        let g = Generator::Lindblad(l);
        let diags = times
            .iter()
            .map(|&t| {
                let (r, v) = traj.sample_with_derivative(t, DEFAULT_H).unwrap();
                PointDiagnostics::evaluate(t, &g, &r, &v).unwrap()
            })
            .collect();
        let fam = LiftFamily::new(2, times.clone(), vec![g; times.len()], diags).unwrap();
        let report = verify_lift(&traj, &fam, 1e-3).unwrap();
        assert!(report.max_residual <= 1e-12);
        assert!(
            report.max_traj_deviation <= 1e-8,
            "{}",
            report.max_traj_deviation
        );
        assert!(report.all_steps_cp);
    }

    #[test]
    fn zeroed_generator_shows_in_residual() {
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
        let grid = uniform(0.0, 1.0, 10);
        let fam = replacer_lift(&traj, &grid, EpsilonPolicy::Adaptive).unwrap();
        let (d, times, mut gens, diags) = fam.into_parts();
        gens[5] = Generator::zero(2);
        let broken = LiftFamily::new(d, times, gens, diags).unwrap();
        let report = verify_lift(&traj, &broken, 1e-3).unwrap();
        assert!(report.max_residual >= CMatrix::diag(&[-0.25, 0.25]).frobenius_norm() - 1e-12);
    }

    #[test]
    fn cp_step_examples() {
        let sigma = CMatrix::diag(&[0.7, 0.3]);
        let valid = Generator::Replacer {
            sigma: sigma.clone(),
            epsilon: 1.0,
        }
        .to_superoperator();
        assert!(cp_step_check(&valid, 0.01).unwrap().cp);
        assert!(!cp_step_check(&valid.scale(-1.0), 0.01).unwrap().cp);
        assert!(cp_step_check(&valid.scale(-1.0), 0.0).unwrap().cp);
    }

    #[test]
    fn repeated_time_uses_one_sided_limits() {
        let a = Generator::Replacer {
            sigma: CMatrix::diag(&[1.0, 0.0]),
            epsilon: 1.0,
        };
        let b = Generator::Replacer {
            sigma: CMatrix::diag(&[0.0, 1.0]),
            epsilon: 1.0,
        };
        let rho = CMatrix::diag(&[0.5, 0.5]);
        let z = CMatrix::zeros(2, 2);
        let diag = |t, g: &Generator| PointDiagnostics::evaluate(t, g, &rho, &z).unwrap();
        let fam = LiftFamily::new(
            2,
            vec![0.0, 1.0, 1.0, 2.0],
            vec![a.clone(), a.clone(), b.clone(), b.clone()],
            vec![diag(0.0, &a), diag(1.0, &a), diag(1.0, &b), diag(2.0, &b)],
        )
        .unwrap();
        let ev = evolve(&fam, &rho, &uniform(0.0, 2.0, 2000)).unwrap();
        let e1 = (-1.0f64).exp();
        let p1 = 1.0 - 0.5 * e1;
        let p2 = p1 * e1;
        assert!((ev.final_state()[(0, 0)].re - p2).abs() <= 1e-8);
        assert!(ev.max_disagreement <= 1e-10);
    }

    #[test]
    fn grid_outside_family_rejected() {
        let fam = replacer_lift(
            &Trajectory::analytic(
                2,
                0.0,
                1.0,
                Arc::new(|_| (CMatrix::diag(&[0.5, 0.5]), None)),
            )
            .unwrap(),
            &[0.0, 0.5],
            EpsilonPolicy::Adaptive,
        )
        .unwrap();
        let err = evolve(&fam, &CMatrix::diag(&[0.5, 0.5]), &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
    }

    #[test]
    fn refinement_keeps_knots() {
        let g = refine_grid(&[0.0, 0.25, 0.25, 1.0], 0.1);
        assert_eq!(g.first(), Some(&0.0));
        assert!(g.contains(&0.25));
        assert_eq!(g.last(), Some(&1.0));
        assert_eq!(g.len(), 1 + 3 + 8);
    }
}
