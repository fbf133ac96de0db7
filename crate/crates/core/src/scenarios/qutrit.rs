use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{uniform_grid, ScenarioResult};
use crate::error::{Error, Result};
use crate::gksl::Lindbladian;
use crate::io::{LiftFamilyJson, PlotTable, TrajectoryJson};
use crate::lift::{solve_feasibility, FeasibilityProblem, Generator, LiftFamily, PointDiagnostics};
use crate::matcore::{CMatrix, C64, ZERO};
use crate::paths::{Trajectory, DEFAULT_H};
use crate::propagate::verify_lift;

/// Residual bound per trajectory for a point to count as lifted.
pub const QUTRIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QutritParams {
    /// `[re, im]`.
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Coherences `z` of the family members, `[re, im]` each.
    pub z: Vec<[f64; 2]>,
    pub t_start: f64,
    pub t_end: f64,
    pub t_step: f64,
    pub verify_step: f64,
}

impl Default for QutritParams {
    fn default() -> Self {
        Self {
            a: [0.2, 0.0],
            b: [0.1, 0.0],
            z: vec![[0.0, 0.0], [0.05, 0.0], [0.0, 0.05]],
            t_start: 0.2,
            t_end: 1.0,
            t_step: 0.05,
            verify_step: 1e-3,
        }
    }
}

/// `ρ_t` with diagonal `1/3`, `(0,1)` entry `z` and `(0,2)`, `(1,2)` entries
/// `a sin t`, `b sin t` (0-based). `z = 0` gives the base path.
pub fn qutrit_path(a: C64, b: C64, z: C64, t0: f64, t1: f64) -> Result<Trajectory> {
    let third = C64::new(1.0 / 3.0, 0.0);
    Trajectory::analytic(
        3,
        t0,
        t1,
        Arc::new(move |t: f64| {
            let (s, c) = t.sin_cos();
            let rho = CMatrix::from_rows(&[
                vec![third, z, a * s],
                vec![z.conj(), third, b * s],
                vec![a.conj() * s, b.conj() * s, third],
            ])
            .expect("3x3");
            let v = CMatrix::from_rows(&[
                vec![ZERO, ZERO, a * c],
                vec![ZERO, ZERO, b * c],
                vec![a.conj() * c, b.conj() * c, ZERO],
            ])
            .expect("3x3");
            (rho, Some(v))
        }),
    )
}

/// `Δ_re = e₀₁ + e₁₀` and `Δ_im = i(e₀₁ − e₁₀)`.
pub fn qutrit_delta() -> [CMatrix; 2] {
    let re = &CMatrix::unit(3, 0, 1) + &CMatrix::unit(3, 1, 0);
    let im = (&CMatrix::unit(3, 0, 1) - &CMatrix::unit(3, 1, 0)).scale_c(C64::new(0.0, 1.0));
    [re, im]
}

#[derive(Clone, Debug)]
pub struct QutritPoint {
    pub t: f64,
    pub generator: Lindbladian,
    /// Residual of the three-constraint solve.
    pub solver_residual: f64,
    /// `‖L(ρ̃_t) − ρ̇_t‖_F` for each `z`.
    pub residuals: Vec<f64>,
}

impl QutritPoint {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .copied()
            .fold(self.solver_residual, f64::max)
    }
}

/// One generator with `L(ρ_t) = ρ̇_t`, `L(Δ_re) = L(Δ_im) = 0`, and its
/// residual on each member of the family.
pub fn qutrit_point(a: C64, b: C64, zs: &[C64], t: f64) -> Result<QutritPoint> {
    let base = qutrit_path(a, b, ZERO, t, t + 1.0)?;
    let (rho, v) = base.sample_with_derivative(t, DEFAULT_H)?;
    let [dre, dim] = qutrit_delta();
    let zero = CMatrix::zeros(3, 3);
    let problem = FeasibilityProblem::new(
        3,
        vec![
            (rho.into_inner(), v.clone().into_inner()),
            (dre, zero.clone()),
            (dim, zero),
        ],
    );
    let sol = solve_feasibility(&problem)?;
    let mut residuals = Vec::with_capacity(zs.len());
    for &z in zs {
        let (rz, vz) = qutrit_path(a, b, z, t, t + 1.0)?.sample_with_derivative(t, DEFAULT_H)?;
        residuals.push(sol.generator.apply(&rz)?.distance(&vz));
    }
    Ok(QutritPoint {
        t,
        generator: sol.generator,
        solver_residual: sol.residual,
        residuals,
    })
}

/// Per-time generators lifting every `ρ̃_t` in the `z` list at once.
/// Fails with `Infeasible` at the first time where some member's residual
/// exceeds [`QUTRIT_TOL`].
pub fn scenario_qutrit_region(p: &QutritParams) -> Result<ScenarioResult> {
    let a = C64::new(p.a[0], p.a[1]);
    let b = C64::new(p.b[0], p.b[1]);
    let bound = a.norm_sqr() + b.norm_sqr();
    if bound > 1.0 / 9.0 {
        return Err(Error::ParameterBound(format!(
            "|a|² + |b|² = {bound} exceeds 1/9"
        )));
    }
    if !(p.t_end > p.t_start && p.t_step > 0.0 && p.verify_step > 0.0) {
        return Err(Error::RangeError(format!(
            "bad time range [{}, {}] with step {}",
            p.t_start, p.t_end, p.t_step
        )));
    }
    if p.z.is_empty() {
        return Err(Error::InvalidInput("z list is empty".into()));
    }
    let zs: Vec<C64> = p.z.iter().map(|z| C64::new(z[0], z[1])).collect();
    let grid = uniform_grid(p.t_start, p.t_end, p.t_step);
    let paths = zs
        .iter()
        .map(|&z| qutrit_path(a, b, z, p.t_start, p.t_end))
        .collect::<Result<Vec<_>>>()?;
    for (z, path) in zs.iter().zip(&paths) {
        for &t in &grid {
            if let Err(e) = path.state(t) {
                return Err(Error::ParameterBound(format!("z = {z} at t = {t}: {e}")));
            }
        }
    }
    let mut result = ScenarioResult::new("qutrit-region", p)?;
    result.metric("parameter_bound", bound);

    let mut columns: Vec<String> = vec!["solver_residual".into()];
    columns.extend((0..zs.len()).map(|k| format!("residual_z{k}")));
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = PlotTable::new("residuals", &refs);
    let mut generators = Vec::with_capacity(grid.len());
    let mut worst_by_z = vec![0.0f64; zs.len()];
    for &t in &grid {
        let point = qutrit_point(a, b, &zs, t)?;
        let mut row = vec![point.solver_residual];
        row.extend(&point.residuals);
        table.push(t, &row);
        for (w, r) in worst_by_z.iter_mut().zip(&point.residuals) {
            *w = w.max(*r);
        }
        if point.max_residual() > QUTRIT_TOL {
            return Err(Error::Infeasible {
                t: Some(t),
                residual: point.max_residual(),
            });
        }
        generators.push(Generator::Lindblad(point.generator));
    }
    result.plots.push(table);
    let radius = zs
        .iter()
        .zip(&worst_by_z)
        .filter(|(_, w)| **w <= QUTRIT_TOL)
        .map(|(z, _)| z.norm())
        .fold(0.0, f64::max);
    result.metric("feasibility_radius", radius);

    for (k, (z, path)) in zs.iter().zip(&paths).enumerate() {
        let mut diagnostics = Vec::with_capacity(grid.len());
        for (&t, g) in grid.iter().zip(&generators) {
            let (rho, v) = path.sample_with_derivative(t, DEFAULT_H)?;
            diagnostics.push(PointDiagnostics::evaluate(t, g, &rho, &v)?);
        }
        let family = LiftFamily::new(3, grid.clone(), generators.clone(), diagnostics)?;
        let report = verify_lift(path, &family, p.verify_step)?;
        result.finding(format!(
            "z = {z}: max residual {:.3e}, integration deviation {:.3e}",
            report.max_residual, report.max_traj_deviation
        ));
        result.reports.insert(format!("z{k}"), report);
        result
            .trajectories
            .insert(format!("z{k}"), TrajectoryJson::sample(path, &grid)?);
        if k == 0 {
            result
                .families
                .insert("lift".into(), LiftFamilyJson::from(&family));
        }
    }
    Ok(result)
}
