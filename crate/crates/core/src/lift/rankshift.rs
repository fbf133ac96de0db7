use super::family::{Generator, LiftFamily, PointDiagnostics};
use crate::error::{Error, Result};
use crate::gksl::{Lindbladian, Superoperator, VALIDITY_TOL};
use crate::matcore::CMatrix;
use crate::paths::{Trajectory, DEFAULT_H};

/// Largest accepted ratio between superoperator steps inside a blending window
/// and the median step in the neighbouring windows on either side.
pub const CONTINUITY_RATIO: f64 = 10.0;

/// Hilbert–Schmidt projection onto `span{ρ}`: `X ↦ ρ·tr(ρX)/‖ρ‖²_F`.
fn state_projection(rho: &CMatrix) -> Superoperator {
    let v = rho.vectorize();
    let n2 = rho.frobenius_norm().powi(2);
    let m = CMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj() / n2);
    Superoperator::from_matrix(rho.rows(), m).expect("square by construction")
}

/// Merges rank-shift times closer than `2·window` into their midpoint, so that
/// an isolated rank drop seen on two grid cells becomes one blending window.
pub fn cluster_rankshifts(times: &[f64], window: f64) -> Vec<f64> {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for t in sorted {
        match out.last_mut() {
            Some((first, last)) if t - *first <= 2.0 * window => *last = t,
            _ => out.push((t, t)),
        }
    }
    out.into_iter().map(|(a, b)| 0.5 * (a + b)).collect()
}

fn window_indices(times: &[f64], tau: f64, w: f64) -> Result<(usize, usize)> {
    let ia = times.iter().rposition(|&t| t <= tau - w);
    let ib = times.iter().position(|&t| t >= tau + w);
    match (ia, ib) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::WindowTooWide(format!(
            "window [{}, {}] leaves the family grid",
            tau - w,
            tau + w
        ))),
    }
}

/// Replaces the generators inside `[τ − w, τ + w]` around each rank shift by
/// `L̃_t = L_t∘E_t + B_t∘(id − E_t)`, where `E_t` projects onto `span{ρ_t}` and
/// `B_t` blends affinely between the generators frozen at the window edges.
/// The action on `ρ_t` is unchanged.
pub fn rankshift_interpolation(
    family: &LiftFamily,
    traj: &Trajectory,
    rankshift_times: &[f64],
    window: f64,
) -> Result<LiftFamily> {
    if rankshift_times.is_empty() {
        return Ok(family.clone());
    }
    if !(window > 0.0) {
        return Err(Error::WindowTooWide(format!(
            "window half-width must be positive, got {window}"
        )));
    }
    let mut shifts = rankshift_times.to_vec();
    shifts.sort_by(f64::total_cmp);
    for w in shifts.windows(2) {
        if w[1] - w[0] <= 2.0 * window {
            return Err(Error::WindowTooWide(format!(
                "windows around {} and {} overlap",
                w[0], w[1]
            )));
        }
    }
    let times = family.times();
    let mut generators = family.generators().to_vec();
    let mut diagnostics = family.diagnostics().to_vec();
    for &tau in &shifts {
        let (ia, ib) = window_indices(times, tau, window)?;
        let sa = generators[ia].to_superoperator();
        let sb = generators[ib].to_superoperator();
        let (ta, tb) = (times[ia], times[ib]);
        for k in ia + 1..ib {
            let t = times[k];
            let (rho, v) = traj.sample_with_derivative(t, DEFAULT_H)?;
            let e = state_projection(&rho);
            let blend = sa.lerp(&sb, (t - ta) / (tb - ta));
            let sk = generators[k].to_superoperator();
            let rest = Superoperator::identity(rho.rows()).sub(&e);
            let s = sk.compose(&e).add(&blend.compose(&rest));
            let l = Lindbladian::from_superoperator(&s, VALIDITY_TOL)?;
            let g = Generator::Lindblad(l);
            diagnostics[k] = PointDiagnostics::evaluate(t, &g, &rho, &v)?;
            generators[k] = g;
        }
    }
    LiftFamily::new(family.dim(), times.to_vec(), generators, diagnostics)
}

/// `‖S_{k+1} − S_k‖_F` for consecutive family points.
pub fn superoperator_steps(family: &LiftFamily) -> Vec<f64> {
    let s = family.superoperators();
    s.windows(2).map(|w| w[1].distance(&w[0])).collect()
}

/// Continuity of a family across each rank shift: the largest step inside
/// `[τ − w, τ + w]` divided by the median step in `[τ − 2w, τ − w]` and
/// `[τ + w, τ + 2w]`. Returns one ratio per shift.
pub fn continuity_ratios(family: &LiftFamily, rankshift_times: &[f64], window: f64) -> Vec<f64> {
    let steps = superoperator_steps(family);
    let times = family.times();
    let mid = |k: usize| 0.5 * (times[k] + times[k + 1]);
    rankshift_times
        .iter()
        .map(|&tau| {
            let inside = (0..steps.len())
                .filter(|&k| (mid(k) - tau).abs() <= window)
                .map(|k| steps[k])
                .fold(0.0, f64::max);
            let mut outside: Vec<f64> = (0..steps.len())
                .filter(|&k| {
                    let dist = (mid(k) - tau).abs();
                    dist > window && dist <= 2.0 * window
                })
                .map(|k| steps[k])
                .collect();
            if outside.is_empty() {
                return f64::INFINITY;
            }
            outside.sort_by(f64::total_cmp);
            let median = outside[outside.len() / 2];
            if median == 0.0 {
                if inside == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                inside / median
            }
        })
        .collect()
}
