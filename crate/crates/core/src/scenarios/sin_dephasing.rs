use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{uniform_grid, ScenarioResult};
use crate::error::{Error, Result};
use crate::io::{LiftFamilyJson, PlotTable, TrajectoryJson};
use crate::lift::{
    cluster_rankshifts, continuity_ratios, rankshift_interpolation, replacer_lift, EpsilonPolicy,
    LiftFamily,
};
use crate::matcore::{pauli, CMatrix};
use crate::paths::{rank_profile, Trajectory};
use crate::propagate::{verify_lift, VerifyReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinDephasingParams {
    pub t_start: f64,
    pub t_end: f64,
    pub grid_step: f64,
    /// Integration step for verification.
    pub verify_step: f64,
    /// Rank threshold for locating rank shifts on the grid.
    pub rank_tol: f64,
    /// Half-width of the blending window around each rank shift.
    pub window: f64,
    /// Spacing of the emitted trajectory samples.
    pub sample_step: f64,
}

impl Default for SinDephasingParams {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: TAU,
            grid_step: 1e-3,
            verify_step: 1e-3,
            rank_tol: 1e-6,
            window: 0.1,
            sample_step: 0.01,
        }
    }
}

/// `ρ_t = ½[[1, sin t], [sin t, 1]]` on `[t0, t1]`.
pub fn dephasing_path(t0: f64, t1: f64) -> Result<Trajectory> {
    Trajectory::analytic(
        2,
        t0,
        t1,
        Arc::new(|t: f64| {
            (
                CMatrix::real(&[&[0.5, 0.5 * t.sin()], &[0.5 * t.sin(), 0.5]]),
                Some(pauli::x().scale(0.5 * t.cos())),
            )
        }),
    )
}

/// Least-squares `g` with `g(ZρZ − ρ) ≈ v`; `None` where `ZρZ = ρ`.
pub fn fitted_dephasing_rate(rho: &CMatrix, v: &CMatrix) -> Option<f64> {
    let z = pauli::z();
    let d = &z.matmul(rho).matmul(&z) - rho;
    let dd = d.inner(&d).re;
    (dd > 1e-24).then(|| d.inner(v).re / dd)
}

fn verify_or_note(
    result: &mut ScenarioResult,
    name: &str,
    traj: &Trajectory,
    fam: &LiftFamily,
    step: f64,
) -> Option<VerifyReport> {
    match verify_lift(traj, fam, step) {
        Ok(r) => {
            if !r.all_steps_cp {
                result.finding(format!(
                    "{name}: some step propagators are not CP (Choi negativity {:.3e} at step {})",
                    r.max_step_choi_negativity, r.grid_step
                ));
            }
            result.reports.insert(name.to_string(), r.clone());
            Some(r)
        }
        Err(e) => {
            result.finding(format!("{name}: verification could not run: {e}"));
            None
        }
    }
}

/// Replacer lifts of the sin-dephasing path with both ε policies, the fitted
/// dephasing rate next to `cot t`, and rank-shift blending of the adaptive
/// family.
pub fn scenario_sin_dephasing(p: &SinDephasingParams) -> Result<ScenarioResult> {
    if !(0.0..=TAU).contains(&p.t_start)
        || !(0.0..=TAU).contains(&p.t_end)
        || !(p.t_end > p.t_start)
    {
        return Err(Error::RangeError(format!(
            "[{}, {}] is not a subinterval of [0, 2π]",
            p.t_start, p.t_end
        )));
    }
    if !(p.grid_step > 0.0
        && p.verify_step > 0.0
        && p.sample_step > 0.0
        && p.rank_tol > 0.0
        && p.window > 0.0)
    {
        return Err(Error::InvalidInput(
            "steps, rank_tol and window must be positive".into(),
        ));
    }
    let mut result = ScenarioResult::new("sin-dephasing", p)?;
    let traj = dephasing_path(p.t_start, p.t_end)?;
    let grid = uniform_grid(p.t_start, p.t_end, p.grid_step);
    result.trajectories.insert(
        "rho".into(),
        TrajectoryJson::sample(&traj, &uniform_grid(p.t_start, p.t_end, p.sample_step))?,
    );

    let adaptive = replacer_lift(&traj, &grid, EpsilonPolicy::Adaptive)?;
    let literal = replacer_lift(&traj, &grid, EpsilonPolicy::PaperLiteral)?;

    let mut table = PlotTable::new(
        "rates",
        &[
            "fitted_rate",
            "cot_t",
            "minus_half_cot_t",
            "epsilon_adaptive",
            "epsilon_literal",
            "sigma_min_eig_literal",
        ],
    );
    let mut rate_dev: f64 = 0.0;
    for ((&t, da), dl) in grid
        .iter()
        .zip(adaptive.diagnostics())
        .zip(literal.diagnostics())
    {
        let (rho, v) = traj.sample_with_derivative(t, crate::paths::DEFAULT_H)?;
        let g = fitted_dephasing_rate(&rho, &v).unwrap_or(f64::NAN);
        let cot = t.cos() / t.sin();
        if g.is_finite() && cot.is_finite() {
            rate_dev = rate_dev.max((g + 0.5 * cot).abs() / (1.0 + cot.abs()));
        }
        table.push(
            t,
            &[
                g,
                cot,
                -0.5 * cot,
                da.epsilon.unwrap_or(f64::NAN),
                dl.epsilon.unwrap_or(f64::NAN),
                dl.sigma_min_eig.unwrap_or(f64::NAN),
            ],
        );
    }
    result.plots.push(table);
    result.metric("fitted_rate_vs_minus_half_cot_max_rel_dev", rate_dev);
    let quarter = std::f64::consts::FRAC_PI_4;
    if (p.t_start..=p.t_end).contains(&quarter) {
        let (rho, v) = traj.sample_with_derivative(quarter, crate::paths::DEFAULT_H)?;
        result.metric(
            "fitted_rate_at_pi_4",
            fitted_dephasing_rate(&rho, &v).unwrap_or(f64::NAN),
        );
    }
    result.finding(format!(
        "the rate reproducing the path is -cot(t)/2 (max relative deviation {rate_dev:.3e}); the stated rate cot(t) has the opposite sign and twice the size, and -cot(t)/2 vanishes at pi/2 and diverges at 0 and pi"
    ));

    let literal_bad: Vec<&crate::lift::PointDiagnostics> = literal
        .diagnostics()
        .iter()
        .filter(|d| d.sigma_min_eig.is_some_and(|m| m < -1e-4))
        .collect();
    if let (Some(first), Some(last)) = (literal_bad.first(), literal_bad.last()) {
        let worst = literal_bad
            .iter()
            .filter_map(|d| d.sigma_min_eig)
            .fold(f64::INFINITY, f64::min);
        result.finding(format!(
            "literal epsilon policy: sigma_t has min eigenvalue below -1e-4 at {} grid points in [{:.4}, {:.4}] (worst {worst:.3e}); those generators are not GKSL",
            literal_bad.len(),
            first.t,
            last.t
        ));
    }
    let underflow = literal
        .diagnostics()
        .iter()
        .filter(|d| d.epsilon == Some(0.0))
        .count();
    if underflow > 0 {
        result.finding(format!("literal epsilon policy: epsilon underflows to zero at {underflow} grid points; the zero generator is used there"));
    }
    result.metric(
        "literal_invalid_points",
        literal
            .diagnostics()
            .iter()
            .filter(|d| !d.gksl_valid)
            .count() as f64,
    );
    result.metric("adaptive_max_residual", adaptive.max_residual());
    result.metric("literal_max_residual", literal.max_residual());
    if !adaptive.all_valid() {
        result.finding("adaptive family has invalid points".into());
    }

    let profile = rank_profile(&traj, &grid, p.rank_tol)?;
    let shifts = cluster_rankshifts(&profile.rankshift_times, p.window);
    for &tau in &shifts {
        result.finding(format!("rank shift near t = {tau:.6}"));
    }
    verify_or_note(&mut result, "adaptive", &traj, &adaptive, p.verify_step);
    verify_or_note(&mut result, "paper_literal", &traj, &literal, p.verify_step);
    result
        .families
        .insert("adaptive".into(), LiftFamilyJson::from(&adaptive));
    result
        .families
        .insert("paper_literal".into(), LiftFamilyJson::from(&literal));

    if !shifts.is_empty() {
        match rankshift_interpolation(&adaptive, &traj, &shifts, p.window) {
            Ok(blended) => {
                let before = continuity_ratios(&adaptive, &shifts, p.window);
                let after = continuity_ratios(&blended, &shifts, p.window);
                for ((tau, b), a) in shifts.iter().zip(&before).zip(&after) {
                    result.finding(format!(
                        "continuity ratio at t = {tau:.6}: {b:.3e} before blending, {a:.3e} after"
                    ));
                }
                result.metric(
                    "continuity_ratio_before_max",
                    before.iter().copied().fold(0.0, f64::max),
                );
                result.metric(
                    "continuity_ratio_after_max",
                    after.iter().copied().fold(0.0, f64::max),
                );
                verify_or_note(
                    &mut result,
                    "adaptive_blended",
                    &traj,
                    &blended,
                    p.verify_step,
                );
                result
                    .families
                    .insert("adaptive_blended".into(), LiftFamilyJson::from(&blended));
            }
            Err(e) => result.finding(format!("rank-shift blending skipped: {e}")),
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_rate_at_quarter_period() {
        let traj = dephasing_path(0.0, 1.0).unwrap();
        let (rho, v) = traj
            .sample_with_derivative(std::f64::consts::FRAC_PI_4, 1e-5)
            .unwrap();
        assert!((fitted_dephasing_rate(&rho, &v).unwrap() + 0.5).abs() <= 1e-9);
        let (rho, v) = traj.sample_with_derivative(0.0, 1e-5).unwrap();
        assert_eq!(fitted_dephasing_rate(&rho, &v), None);
    }

    #[test]
    fn state_at_half_period_is_pure_and_stationary() {
        let traj = dephasing_path(0.0, TAU).unwrap();
        let (rho, v) = traj
            .sample_with_derivative(std::f64::consts::FRAC_PI_2, 1e-5)
            .unwrap();
        assert!(rho.distance(&CMatrix::real(&[&[0.5, 0.5], &[0.5, 0.5]])) <= 1e-15);
        assert!(v.frobenius_norm() <= 1e-16);
    }

    #[test]
    fn short_range_scenario() {
        let p = SinDephasingParams {
            t_end: 1.2,
            ..Default::default()
        };
        let r = scenario_sin_dephasing(&p).unwrap();
        let rep = &r.reports["adaptive"];
        assert!(
            rep.max_residual <= 1e-10 && rep.all_steps_cp && rep.max_traj_deviation <= 1e-6,
            "{rep:?}"
        );
        assert!((r.metrics["fitted_rate_at_pi_4"] + 0.5).abs() <= 1e-9);
    }

    #[test]
    fn range_checked() {
        let p = SinDephasingParams {
            t_end: 7.0,
            ..Default::default()
        };
        assert!(matches!(
            scenario_sin_dephasing(&p),
            Err(Error::RangeError(_))
        ));
    }
}
