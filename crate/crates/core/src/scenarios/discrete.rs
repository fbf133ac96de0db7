use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{uniform_grid, ScenarioResult};
use crate::error::{Error, Result};
use crate::io::{LiftFamilyJson, MatrixJson, PlotTable, TrajectoryJson};
use crate::lift::{
    exponential_approach_lift, geometric_lift_affine, max_feasible_epsilon, replacer_lift,
    EpsilonPolicy, Generator, GeometricReport, LiftFamily, PointDiagnostics, GEOMETRIC_GRID,
};
use crate::matcore::eig::min_eigenvalue;
use crate::matcore::{validate_density, CMatrix, RANK_TOL};
use crate::paths::{piecewise_affine_from_points, Trajectory, DEFAULT_H, SAMPLE_TOL};
use crate::propagate::{evolve, refine_grid, verify_lift};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscreteParams {
    pub states: Vec<MatrixJson>,
    pub times: Vec<f64>,
    /// Lift grid cells per segment.
    pub segment_points: usize,
    pub verify_step: f64,
    /// Relative distance to the end knot left by an approach segment.
    pub approach_tol: f64,
}

impl Default for DiscreteParams {
    fn default() -> Self {
        let knots = [
            [[0.7, 0.0], [0.1, 0.2]],
            [[0.4, 0.0], [-0.15, 0.05]],
            [[0.55, 0.0], [0.2, -0.1]],
            [[0.25, 0.0], [0.0, 0.3]],
            [[0.5, 0.0], [0.05, 0.0]],
        ];
        let states = knots
            .iter()
            .map(|[[p, _], [re, im]]| {
                MatrixJson(vec![
                    vec![[*p, 0.0], [*re, *im]],
                    vec![[*re, -*im], [1.0 - p, 0.0]],
                ])
            })
            .collect();
        Self {
            states,
            times: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            segment_points: 200,
            verify_step: 1e-3,
            approach_tol: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentBranch {
    /// Identical endpoints; zero generator.
    Stationary,
    /// Replacer lift of the affine segment with one `ε` for the whole
    /// segment, half the smaller endpoint `ε_max` (capped at 1). The
    /// generator is then affine in `t`, so interpolating it is exact.
    Replacer,
    /// End knot is rank-deficient; exponential approach under a constant
    /// replacer generator, with the geometric lift reported alongside.
    Approach,
}

fn segment_family(g: Generator, traj: &Trajectory, grid: &[f64]) -> Result<LiftFamily> {
    let mut diagnostics = Vec::with_capacity(grid.len());
    for &t in grid {
        let (rho, v) = traj.sample_with_derivative(t, DEFAULT_H)?;
        diagnostics.push(PointDiagnostics::evaluate(t, &g, &rho, &v)?);
    }
    LiftFamily::new(g.dim(), grid.to_vec(), vec![g; grid.len()], diagnostics)
}

/// Lift of the piecewise-affine path through a list of knots.
#[derive(Clone, Debug)]
pub struct KnotLift {
    pub family: LiftFamily,
    pub branches: Vec<SegmentBranch>,
    /// The path the family generates: the affine interpolant, except on
    /// approach segments where it is the exponential approach.
    pub realized: Trajectory,
    /// Geometric-lift report for each approach segment, by segment index.
    pub geometric: Vec<(usize, GeometricReport)>,
}

/// Per-segment lifts of the piecewise-affine interpolation through `states`
/// at `times`, concatenated into one family (repeated knot times carry the
/// left and right generators).
pub fn knot_lift(
    states: &[CMatrix],
    times: &[f64],
    segment_points: usize,
    approach_tol: f64,
) -> Result<KnotLift> {
    if states.len() != times.len() || states.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{} states for {} times; need at least two of each",
            states.len(),
            times.len()
        )));
    }
    if segment_points == 0 || !(approach_tol > 0.0 && approach_tol < 1.0) {
        return Err(Error::InvalidInput(
            "segment_points must be positive and approach_tol in (0, 1)".into(),
        ));
    }
    for (index, s) in states.iter().enumerate() {
        let r = validate_density(s, SAMPLE_TOL);
        if !r.is_density {
            return Err(Error::NotADensity {
                index,
                reason: format!(
                    "trace deviation {:.3e}, min eigenvalue {:.3e}",
                    r.trace_dev, r.min_eig
                ),
            });
        }
    }
    if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonIncreasingTimes { index: k + 1 });
    }
    let d = states[0].rows();
    let mut family: Option<LiftFamily> = None;
    let mut branches = Vec::with_capacity(states.len() - 1);
    let mut pieces = Vec::with_capacity(states.len() - 1);
    let mut geometric = Vec::new();
    for k in 0..states.len() - 1 {
        let (sa, sb) = (&states[k], &states[k + 1]);
        let (ta, tb) = (times[k], times[k + 1]);
        let grid = uniform_grid(ta, tb, (tb - ta) / segment_points as f64);
        let affine = Trajectory::piecewise_affine(vec![sa.clone(), sb.clone()], vec![ta, tb])?;
        let branch = if sa.distance(sb) == 0.0 {
            SegmentBranch::Stationary
        } else if min_eigenvalue(sb) > RANK_TOL {
            SegmentBranch::Replacer
        } else {
            SegmentBranch::Approach
        };
        let (seg, piece) = match branch {
            SegmentBranch::Stationary => {
                (segment_family(Generator::zero(d), &affine, &grid)?, affine)
            }
            SegmentBranch::Replacer => {
                let v = (sb - sa).scale(1.0 / (tb - ta));
                let emax = max_feasible_epsilon(sa, &v).min(max_feasible_epsilon(sb, &v));
                let eps = (0.5 * emax).min(1.0);
                (
                    replacer_lift(&affine, &grid, EpsilonPolicy::Constant(eps))?,
                    affine,
                )
            }
            SegmentBranch::Approach => {
                let geo_grid = uniform_grid(GEOMETRIC_GRID.0, GEOMETRIC_GRID.1, 0.01);
                geometric.push((k, geometric_lift_affine(sb, sa, &geo_grid)?.report));
                exponential_approach_lift(sa, sb, ta, tb, &grid, approach_tol)?
            }
        };
        family = Some(match family {
            None => seg,
            Some(f) => f.concat(seg)?,
        });
        branches.push(branch);
        pieces.push(piece);
    }
    let starts = times.to_vec();
    let realized = Trajectory::analytic(
        d,
        times[0],
        times[times.len() - 1],
        Arc::new(move |t: f64| {
            let k = starts
                .partition_point(|&s| s <= t)
                .saturating_sub(1)
                .min(pieces.len() - 1);
            match pieces[k].sample_with_derivative(t, DEFAULT_H) {
                Ok((rho, v)) => (rho.into_inner(), Some(v.into_inner())),
                Err(_) => (CMatrix::zeros(d, d), None),
            }
        }),
    )?;
    Ok(KnotLift {
        family: family.expect("at least one segment"),
        branches,
        realized,
        geometric,
    })
}

/// Knot lift of the given samples, integrated from the first knot to check
/// that every knot is reached.
pub fn scenario_discrete_points(p: &DiscreteParams) -> Result<ScenarioResult> {
    let states = p
        .states
        .iter()
        .map(CMatrix::try_from)
        .collect::<Result<Vec<_>>>()?;
    if !(p.verify_step > 0.0) {
        return Err(Error::InvalidInput("verify_step must be positive".into()));
    }
    let lift = knot_lift(&states, &p.times, p.segment_points, p.approach_tol)?;
    let mut result = ScenarioResult::new("discrete", p)?;
    for (k, r) in &lift.geometric {
        result.finding(format!(
            "segment {k} ends at a rank-deficient knot: geometric lift has residual {:.3e}, coefficient sup {:.3e} and end value {:.3e}, with {} points GKSL-valid; its adaptive alternative has residual {:.3e} and is {}; the integrated family approaches the knot exponentially",
            r.literal_max_residual,
            r.coefficient_sup,
            r.coefficient_end,
            r.literal_valid_points,
            r.alternative_max_residual,
            if r.alternative_all_valid { "valid" } else { "not valid everywhere" }
        ));
        result.metric(
            &format!("segment_{k}_geometric_coefficient_sup"),
            r.coefficient_sup,
        );
    }
    for (k, b) in lift.branches.iter().enumerate() {
        result.finding(format!(
            "segment {k} [{}, {}]: {b:?}",
            p.times[k],
            p.times[k + 1]
        ));
    }
    let approach_count = lift
        .branches
        .iter()
        .filter(|b| **b == SegmentBranch::Approach)
        .count();
    if approach_count > 0 {
        result.finding(format!("{approach_count} segment(s) follow the exponential approach instead of the affine interpolant"));
    }

    let grid = refine_grid(lift.family.times(), p.verify_step);
    let evolution = evolve(&lift.family, &states[0], &grid)?;
    let mut knot_dev: f64 = 0.0;
    let mut table = PlotTable::new("knots", &["deviation"]);
    for (t, s) in p.times.iter().zip(&states) {
        let i = grid
            .iter()
            .position(|g| g == t)
            .expect("knots are grid points");
        let dev = evolution.exponential[i].distance(s);
        knot_dev = knot_dev.max(dev);
        table.push(*t, &[dev]);
    }
    result.plots.push(table);
    result.metric("knot_max_deviation", knot_dev);
    result.metric("integrator_disagreement", evolution.max_disagreement);
    result.reports.insert(
        "realized".into(),
        verify_lift(&lift.realized, &lift.family, p.verify_step)?,
    );
    let interpolant = piecewise_affine_from_points(&states, &p.times)?;
    result.trajectories.insert(
        "interpolant".into(),
        TrajectoryJson::from_discrete(&interpolant)?,
    );
    result.trajectories.insert(
        "integrated".into(),
        TrajectoryJson::from_discrete(&evolution.trajectory()?)?,
    );
    result
        .families
        .insert("lift".into(), LiftFamilyJson::from(&lift.family));
    Ok(result)
}
