//! Browser bindings. Each export takes plain numbers and returns a JSON
//! string; the `*_json` functions hold the logic and run natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lindlift::lift::{
    max_feasible_epsilon, min_dissipation_rate, replacer_generator, replacer_lift,
    tangent_cone_membership, EpsilonPolicy, Generator, LiftFamily, PointDiagnostics,
    FEASIBILITY_TOL,
};
use lindlift::matcore::{pauli, CMatrix, DensityMatrix};
use lindlift::paths::DEFAULT_H;
use lindlift::propagate::evolve;
use lindlift::scenarios::{dephasing_path, eternal_nm_path, fitted_dephasing_rate, two_point_lift};

const MAX_POINTS: usize = 20_000;

/// `½(I + r·σ)`.
fn bloch_state(r: [f64; 3]) -> Result<CMatrix, String> {
    let m = bloch_operator(r).scale(0.5);
    let mut rho = CMatrix::identity(2).scale(0.5);
    rho += &m;
    DensityMatrix::new(rho)
        .map(DensityMatrix::into_inner)
        .map_err(|e| format!("Bloch vector outside the ball: {e}"))
}

fn bloch_operator(r: [f64; 3]) -> CMatrix {
    let mut m = pauli::x().scale(r[0]);
    m += &pauli::y().scale(r[1]);
    m += &pauli::z().scale(r[2]);
    m
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct TangentReport {
    member: bool,
    kernel_min_eig: Option<f64>,
    residual: Option<f64>,
    epsilon_max: f64,
    min_rate: Option<f64>,
    /// Bloch vector of `σ = ρ + εv` for the adaptive ε, when it exists.
    sigma: Option<[f64; 3]>,
}

/// Tangent-cone test, replacer ε bound and minimal dissipation for a qubit
/// state with Bloch vector `r` moving with Bloch velocity `u`.
pub fn tangent_json(r: [f64; 3], u: [f64; 3]) -> Result<String, String> {
    let rho = bloch_state(r)?;
    let v = bloch_operator(u).scale(0.5);
    let m = tangent_cone_membership(&rho, &v, FEASIBILITY_TOL).map_err(|e| e.to_string())?;
    let epsilon_max = max_feasible_epsilon(&rho, &v);
    let min_rate = if m.member {
        min_dissipation_rate(&rho, &v, 1e-3).ok()
    } else {
        None
    };
    let sigma = match replacer_generator(&rho, &v, 0.0, EpsilonPolicy::Adaptive) {
        Ok(Generator::Replacer { sigma, .. }) => Some([
            sigma.inner(&pauli::x()).re,
            sigma.inner(&pauli::y()).re,
            sigma.inner(&pauli::z()).re,
        ]),
        _ => None,
    };
    to_json(&TangentReport {
        member: m.member,
        kernel_min_eig: m.kernel_min_eig.is_finite().then_some(m.kernel_min_eig),
        residual: m.residual,
        epsilon_max,
        min_rate,
        sigma,
    })
}

#[derive(Serialize)]
struct Series {
    t: Vec<f64>,
    path: Vec<f64>,
    integrated: Vec<f64>,
    max_deviation: f64,
    witness_gap_residual: f64,
}

/// Coherence `ρ₀₁(t)` of the eternally non-Markovian path next to the state
/// integrated under the constant two-point generator.
pub fn eternal_nm_json(horizon: f64, steps: usize) -> Result<String, String> {
    if !(horizon > 0.0 && horizon <= 20.0) || steps == 0 || steps > MAX_POINTS {
        return Err(format!("need 0 < horizon ≤ 20 and 1 ≤ steps ≤ {MAX_POINTS}"));
    }
    let traj = eternal_nm_path(0.0, horizon).map_err(|e| e.to_string())?;
    let sol = two_point_lift(&[0.2, 1.0, 3.0]).map_err(|e| e.to_string())?;
    let g = Generator::Lindblad(sol.generator);
    let t: Vec<f64> = (0..=steps)
        .map(|k| horizon * k as f64 / steps as f64)
        .collect();
    let ends = [0.0, horizon];
    let mut diagnostics = Vec::with_capacity(2);
    for &s in &ends {
        let (rho, v) = traj
            .sample_with_derivative(s, DEFAULT_H)
            .map_err(|e| e.to_string())?;
        diagnostics.push(PointDiagnostics::evaluate(s, &g, &rho, &v).map_err(|e| e.to_string())?);
    }
    let family = LiftFamily::new(2, ends.to_vec(), vec![g.clone(), g], diagnostics)
        .map_err(|e| e.to_string())?;
    let rho0 = traj.state(0.0).map_err(|e| e.to_string())?.into_inner();
    let ev = evolve(&family, &rho0, &t).map_err(|e| e.to_string())?;
    let mut path = Vec::with_capacity(t.len());
    let mut max_deviation: f64 = 0.0;
    for (s, x) in t.iter().zip(&ev.exponential) {
        let rho = traj.state(*s).map_err(|e| e.to_string())?;
        max_deviation = max_deviation.max(x.distance(rho.as_matrix()));
        path.push(rho.as_matrix()[(0, 1)].re);
    }
    to_json(&Series {
        integrated: ev.exponential.iter().map(|x| x[(0, 1)].re).collect(),
        t,
        path,
        max_deviation,
        witness_gap_residual: sol.residual,
    })
}

#[derive(Serialize)]
struct Rates {
    t: Vec<f64>,
    fitted_rate: Vec<Option<f64>>,
    cot: Vec<Option<f64>>,
    epsilon_adaptive: Vec<Option<f64>>,
    sigma_min_eig_literal: Vec<Option<f64>>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Fitted dephasing rate, `cot t`, the adaptive ε and the smallest
/// eigenvalue of the literal-ε target state along `½[[1, sin t], [sin t, 1]]`.
pub fn sin_dephasing_json(t_end: f64, points: usize) -> Result<String, String> {
    if !(t_end > 0.0 && t_end <= std::f64::consts::TAU) || !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("need 0 < t_end ≤ 2π and 2 ≤ points ≤ {MAX_POINTS}"));
    }
    let traj = dephasing_path(0.0, t_end).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..points)
        .map(|k| t_end * k as f64 / (points - 1) as f64)
        .collect();
    let adaptive = replacer_lift(&traj, &grid, EpsilonPolicy::Adaptive).map_err(|e| e.to_string())?;
    let literal =
        replacer_lift(&traj, &grid, EpsilonPolicy::PaperLiteral).map_err(|e| e.to_string())?;
    let mut fitted_rate = Vec::with_capacity(points);
    for &s in &grid {
        let (rho, v) = traj
            .sample_with_derivative(s, DEFAULT_H)
            .map_err(|e| e.to_string())?;
        fitted_rate.push(fitted_dephasing_rate(&rho, &v).and_then(finite));
    }
    to_json(&Rates {
        cot: grid.iter().map(|s| finite(s.cos() / s.sin())).collect(),
        epsilon_adaptive: adaptive.diagnostics().iter().map(|d| d.epsilon).collect(),
        sigma_min_eig_literal: literal.diagnostics().iter().map(|d| d.sigma_min_eig).collect(),
        fitted_rate,
        t: grid,
    })
}

#[wasm_bindgen]
pub fn tangent(rx: f64, ry: f64, rz: f64, ux: f64, uy: f64, uz: f64) -> Result<String, JsValue> {
    tangent_json([rx, ry, rz], [ux, uy, uz]).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn eternal_nm(horizon: f64, steps: usize) -> Result<String, JsValue> {
    eternal_nm_json(horizon, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sin_dephasing(t_end: f64, points: usize) -> Result<String, JsValue> {
    sin_dephasing_json(t_end, points).map_err(|e| JsValue::from_str(&e))
}
