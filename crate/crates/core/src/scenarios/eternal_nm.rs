use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{uniform_grid, ScenarioResult};
use crate::error::{Error, Result};
use crate::gksl::{Lindbladian, Superoperator};
use crate::io::{LiftFamilyJson, PlotTable, TrajectoryJson};
use crate::lift::{
    feasibility_lift, replacer_lift, EpsilonPolicy, FeasibilityProblem, FeasibilitySolution,
    Generator, LiftFamily, PointDiagnostics,
};
use crate::matcore::{pauli, CMatrix, DensityMatrix, C64};
use crate::paths::{product_path, Trajectory, DEFAULT_H, MAX_REGISTERS};
use crate::propagate::{verify_lift, VerifyReport};

/// Times at which the two-point lift matches the path velocity.
const MATCH_TIMES: [f64; 3] = [0.2, 1.0, 3.0];
/// Times at which the channel's Choi matrix is checked.
const CHANNEL_TIMES: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EternalNmParams {
    pub horizon: f64,
    /// Number of qubit registers in the product family.
    pub n: usize,
    pub step: f64,
    /// Grid spacing of the constant-ε replacer family.
    pub family_step: f64,
    pub sample_step: f64,
}

impl Default for EternalNmParams {
    fn default() -> Self {
        Self {
            horizon: 5.0,
            n: 3,
            step: 1e-3,
            family_step: 1e-3,
            sample_step: 0.05,
        }
    }
}

/// The eternally non-Markovian qubit channel at time `t`, extended linearly
/// from trace-one inputs.
pub fn eternal_nm_channel(t: f64) -> Superoperator {
    let e = (-2.0 * t).exp();
    Superoperator::from_map(2, |x| {
        let tr = x.trace();
        let p = tr * (0.5 * (1.0 - e)) + x[(0, 0)] * e;
        CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => p,
            (1, 1) => tr - p,
            _ => x[(i, j)] * (0.5 * (1.0 + e)),
        })
    })
}

/// `ρ_t = ¼[[2, 1 + e^{−2t}], [1 + e^{−2t}, 2]]`.
pub fn eternal_nm_path(t0: f64, t1: f64) -> Result<Trajectory> {
    Trajectory::analytic(
        2,
        t0,
        t1,
        Arc::new(|t: f64| {
            let e = (-2.0 * t).exp();
            let rho = &CMatrix::identity(2).scale(0.5) + &pauli::x().scale(0.25 * (1.0 + e));
            (rho, Some(pauli::x().scale(-0.5 * e)))
        }),
    )
}

/// `ρ_∞ = ¼[[2, 1], [1, 2]]`.
pub fn eternal_nm_asymptote() -> DensityMatrix {
    DensityMatrix::new(CMatrix::real(&[&[0.5, 0.25], &[0.25, 0.5]])).expect("valid state")
}

/// Jumps `|+⟩⟨−|` at rate 3/2 and `|−⟩⟨+|` at rate 1/2, which fix `ρ_∞`
/// and relax the `X` component at rate 2.
pub fn eternal_nm_witness() -> Lindbladian {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = [C64::new(s, 0.0), C64::new(s, 0.0)];
    let minus = [C64::new(s, 0.0), C64::new(-s, 0.0)];
    Lindbladian::with_jumps(
        &CMatrix::zeros(2, 2),
        vec![CMatrix::outer(&plus, &minus), CMatrix::outer(&minus, &plus)],
        vec![1.5, 0.5],
    )
    .expect("qubit jumps")
}

/// Constant generator with `L(ρ_t) = ρ̇_t` at `times` and `L(ρ_∞) = 0`.
pub fn two_point_lift(times: &[f64]) -> Result<FeasibilitySolution> {
    let traj = eternal_nm_path(0.0, times.iter().copied().fold(1.0, f64::max))?;
    let mut constraints = Vec::with_capacity(times.len() + 1);
    for &t in times {
        let (rho, v) = traj.sample_with_derivative(t, DEFAULT_H)?;
        constraints.push((rho.into_inner(), v.into_inner()));
    }
    constraints.push((eternal_nm_asymptote().into_inner(), CMatrix::zeros(2, 2)));
    feasibility_lift(&FeasibilityProblem::new(2, constraints))
}

/// Largest `‖(L − W)(X)‖_F` over `X ∈ {I, σ_x}`, the span fixed by the
/// constraints.
fn witness_gap(l: &Lindbladian) -> Result<f64> {
    let w = eternal_nm_witness();
    let mut gap: f64 = 0.0;
    for x in [CMatrix::identity(2), pauli::x()] {
        gap = gap.max(l.apply(&x)?.distance(&w.apply(&x)?));
    }
    Ok(gap)
}

fn constant_family(g: &Generator, traj: &Trajectory, times: &[f64]) -> Result<LiftFamily> {
    let mut diagnostics = Vec::with_capacity(times.len());
    for &t in times {
        let (rho, v) = traj.sample_with_derivative(t, DEFAULT_H)?;
        diagnostics.push(PointDiagnostics::evaluate(t, g, &rho, &v)?);
    }
    LiftFamily::new(
        g.dim(),
        times.to_vec(),
        vec![g.clone(); times.len()],
        diagnostics,
    )
}

fn subset_name(subset: &[usize], n: usize) -> String {
    (0..n)
        .map(|i| if subset.contains(&i) { '1' } else { '0' })
        .collect()
}

/// Channel checks, the constant-ε replacer lift, the two-point constant lift
/// and its amplification to `n` registers, verified on all `2^n` product
/// paths.
pub fn scenario_eternal_nm(p: &EternalNmParams) -> Result<ScenarioResult> {
    if !(p.horizon > 0.0) || !p.horizon.is_finite() {
        return Err(Error::RangeError(format!(
            "horizon must be positive, got {}",
            p.horizon
        )));
    }
    if p.n == 0 || p.n > MAX_REGISTERS {
        return Err(Error::DimensionCap {
            dim: 1usize << p.n.min(16),
            cap: 1 << MAX_REGISTERS,
        });
    }
    if !(p.step > 0.0 && p.family_step > 0.0 && p.sample_step > 0.0) {
        return Err(Error::InvalidInput("steps must be positive".into()));
    }
    let mut result = ScenarioResult::new("eternal-nm", p)?;
    let traj = eternal_nm_path(0.0, p.horizon)?;
    let rho0 = CMatrix::real(&[&[0.5, 0.5], &[0.5, 0.5]]);

    let mut path_dev: f64 = 0.0;
    let mut channel_min: f64 = f64::INFINITY;
    let mut table = PlotTable::new(
        "channel",
        &["coherence_channel", "coherence_path", "choi_min_eig"],
    );
    let times = uniform_grid(0.0, p.horizon, p.sample_step);
    for &t in times.iter().chain(CHANNEL_TIMES.iter()) {
        let ch = eternal_nm_channel(t);
        let out = ch.apply(&rho0)?;
        let expected = traj.state(t.min(p.horizon))?;
        if t <= p.horizon {
            path_dev = path_dev.max(out.distance(&expected));
        }
        let m = ch.choi().min_eig();
        if CHANNEL_TIMES.contains(&t) {
            channel_min = channel_min.min(m);
        } else {
            table.push(t, &[out[(0, 1)].re, expected[(0, 1)].re, m]);
        }
    }
    result.plots.push(table);
    result.metric("channel_path_max_dev", path_dev);
    result.metric("channel_choi_min_eig", channel_min);
    if path_dev > 1e-12 {
        result.finding(format!(
            "channel output deviates from the displayed path by {path_dev:.3e}"
        ));
    }
    if channel_min < -1e-10 {
        result.finding(format!(
            "channel Choi matrix has eigenvalue {channel_min:.3e}"
        ));
    }
    result
        .trajectories
        .insert("rho".into(), TrajectoryJson::sample(&traj, &times)?);

    let grid = uniform_grid(0.0, p.horizon, p.family_step);
    let replacer = replacer_lift(&traj, &grid, EpsilonPolicy::Constant(1.0))?;
    let rep = verify_lift(&traj, &replacer, p.step)?;
    result.reports.insert("replacer_const_eps".into(), rep);
    result
        .families
        .insert("replacer_const_eps".into(), LiftFamilyJson::from(&replacer));
    let inf = eternal_nm_asymptote();
    let drift = replacer
        .generators()
        .iter()
        .map(|g| g.apply(inf.as_matrix()).map(|x| x.frobenius_norm()))
        .try_fold(0.0, |m: f64, x| x.map(|x| m.max(x)))?;
    result.metric("replacer_asymptote_action_max", drift);
    result.finding(format!("the replacer lift does not annihilate the asymptotic state (max ‖L_t(ρ_∞)‖ = {drift:.3e}); the product family uses the two-point lift"));

    let sol = two_point_lift(&MATCH_TIMES)?;
    let gap = witness_gap(&sol.generator)?;
    result.metric("two_point_residual", sol.residual);
    result.metric("two_point_witness_gap", gap);
    let single = Generator::Lindblad(sol.generator.clone());
    let coarse = uniform_grid(0.0, p.horizon, p.sample_step);
    let single_family = constant_family(&single, &traj, &coarse)?;
    result.reports.insert(
        "two_point".into(),
        verify_lift(&traj, &single_family, p.step)?,
    );
    result
        .families
        .insert("two_point".into(), LiftFamilyJson::from(&single_family));

    let parts = (0..p.n)
        .map(|i| sol.generator.embed(i, p.n))
        .collect::<Result<Vec<_>>>()?;
    let product = Generator::Lindblad(Lindbladian::sum(&parts)?);
    let subsets: Vec<Vec<usize>> = (0..1usize << p.n)
        .map(|mask| (0..p.n).filter(|i| mask >> i & 1 == 1).collect())
        .collect();
    let paths = subsets
        .iter()
        .map(|s| product_path(&traj, &inf, s, p.n))
        .collect::<Result<Vec<_>>>()?;
    let full = paths.last().expect("at least one subset");
    let product_family = constant_family(&product, full, &coarse)?;
    let reports: Vec<Result<VerifyReport>> = thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|path| scope.spawn(|| verify_lift(path, &product_family, p.step)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("verification thread panicked"))
            .collect()
    });
    let mut worst: f64 = 0.0;
    for (s, r) in subsets.iter().zip(reports) {
        let r = r?;
        worst = worst.max(r.max_traj_deviation);
        result
            .reports
            .insert(format!("product_{}", subset_name(s, p.n)), r);
    }
    result.metric("product_max_traj_deviation", worst);
    result
        .families
        .insert("product".into(), LiftFamilyJson::from(&product_family));
    Ok(result)
}
