use serde::{Deserialize, Serialize};

use super::real::{flatten, norm, RealMatrix};
use super::replacer::kernel_compression_min;
use super::spectral::spectral_generator;
use crate::error::{Error, Result};
use crate::gksl::{gellmann_basis, Lindbladian};
use crate::matcore::eig::eigh;
use crate::matcore::{CMatrix, C64, RANK_TOL};

/// Weight of the total-rate term when minimizing dissipation.
pub const RATE_PENALTY: f64 = 1e-6;
/// Residual below which a feasibility solve counts as successful.
pub const FEASIBILITY_TOL: f64 = 1e-8;
const STALL_WINDOW: usize = 500;
const STALL_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    None,
    /// Adds `λ·tr C` with `λ = 1e−6`, then polishes the residual without it.
    MinTotalRate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub max_iter: usize,
    /// Initial step; defaults to the inverse Lipschitz constant.
    pub step: Option<f64>,
    pub tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            step: None,
            tol: FEASIBILITY_TOL,
        }
    }
}

/// Find `L = (H, C)`, `C ⪰ 0`, with `L(X_i) = Y_i` for every constraint.
#[derive(Clone, Debug)]
pub struct FeasibilityProblem {
    pub dim: usize,
    pub constraints: Vec<(CMatrix, CMatrix)>,
    pub objective: Objective,
    pub params: SolverParams,
    /// Optional bound `tr C ≤ cap`, enforced in the projection.
    pub rate_cap: Option<f64>,
}

impl FeasibilityProblem {
    pub fn new(dim: usize, constraints: Vec<(CMatrix, CMatrix)>) -> Self {
        Self {
            dim,
            constraints,
            objective: Objective::None,
            params: SolverParams::default(),
            rate_cap: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::InvalidInput(
                "feasibility problem needs at least one constraint".into(),
            ));
        }
        for (x, y) in &self.constraints {
            for m in [x, y] {
                if m.rows() != self.dim || m.cols() != self.dim {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{0}x{0}", self.dim),
                        found: format!("{}x{}", m.rows(), m.cols()),
                    });
                }
                if !m.is_hermitian(1e-10) {
                    return Err(Error::NonHermitianInput {
                        deviation: m.hermiticity_deviation(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FeasibilitySolution {
    pub generator: Lindbladian,
    /// `(Σ_i ‖L(X_i) − Y_i‖_F²)^{1/2}`.
    pub residual: f64,
    pub iterations: usize,
}

/// Real parameterization of `(H, C)`: `n = d²−1` Hamiltonian coordinates,
/// then the `n` diagonal entries of `C`, then `√2·Re C_kl` and `√2·Im C_kl`
/// for `k < l`. The scaling makes the Euclidean norm of the `C` block equal
/// to `‖C‖_F`, so eigenvalue clipping is the exact projection.
struct Layout {
    d: usize,
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl Layout {
    fn new(d: usize) -> Self {
        let n = d * d - 1;
        let pairs = (0..n)
            .flat_map(|k| (k + 1..n).map(move |l| (k, l)))
            .collect();
        Self { d, n, pairs }
    }

    fn len(&self) -> usize {
        self.n + self.n * self.n
    }

    fn c_offset(&self) -> usize {
        self.n
    }

    fn kossakowski(&self, p: &[f64]) -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let base = self.c_offset();
        let mut c = CMatrix::zeros(self.n, self.n);
        for k in 0..self.n {
            c[(k, k)] = C64::new(p[base + k], 0.0);
        }
        let np = self.pairs.len();
        for (idx, &(k, l)) in self.pairs.iter().enumerate() {
            let z = C64::new(p[base + self.n + idx], p[base + self.n + np + idx]) * s;
            c[(k, l)] = z;
            c[(l, k)] = z.conj();
        }
        c
    }

    fn write_kossakowski(&self, c: &CMatrix, p: &mut [f64]) {
        let r2 = std::f64::consts::SQRT_2;
        let base = self.c_offset();
        for k in 0..self.n {
            p[base + k] = c[(k, k)].re;
        }
        let np = self.pairs.len();
        for (idx, &(k, l)) in self.pairs.iter().enumerate() {
            p[base + self.n + idx] = c[(k, l)].re * r2;
            p[base + self.n + np + idx] = c[(k, l)].im * r2;
        }
    }

    fn lindbladian(&self, p: &[f64], basis: &[CMatrix]) -> Lindbladian {
        let mut h = CMatrix::zeros(self.d, self.d);
        for (k, f) in basis.iter().enumerate() {
            h.axpy(C64::new(p[k], 0.0), f);
        }
        Lindbladian::with_kossakowski(&h, self.kossakowski(p))
            .expect("parameterization is Hermitian")
    }

    /// Columns of the linear map `p ↦ (L(X_i))_i`, flattened.
    fn design(&self, xs: &[&CMatrix], basis: &[CMatrix]) -> RealMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let term = |k: usize, l: usize, x: &CMatrix| {
            let mut out = basis[k].matmul(x).matmul(&basis[l]);
            out.axpy(
                C64::new(-0.5, 0.0),
                &basis[l].matmul(&basis[k]).anticommutator(x),
            );
            out
        };
        let image = |f: &dyn Fn(&CMatrix) -> CMatrix| {
            xs.iter().flat_map(|x| flatten(&f(x))).collect::<Vec<f64>>()
        };
        let mut cols = Vec::with_capacity(self.len());
        for f in basis {
            cols.push(image(&|x| f.commutator(x).scale_c(C64::new(0.0, -1.0))));
        }
        for k in 0..self.n {
            cols.push(image(&|x| term(k, k, x)));
        }
        for &(k, l) in &self.pairs {
            cols.push(image(&|x| (&term(k, l, x) + &term(l, k, x)).scale(s)));
        }
        for &(k, l) in &self.pairs {
            cols.push(image(&|x| {
                (&term(k, l, x) - &term(l, k, x)).scale_c(C64::new(0.0, s))
            }));
        }
        RealMatrix::from_columns(2 * self.d * self.d * xs.len(), cols)
    }

    fn project(&self, p: &mut [f64], cap: Option<f64>) {
        let e = eigh(&self.kossakowski(p));
        let mu = project_spectrum(&e.values, cap);
        let c = e.with_values(&mu);
        self.write_kossakowski(&c, p);
    }
}

/// Euclidean projection of a spectrum onto `{μ ≥ 0}` or `{μ ≥ 0, Σμ ≤ cap}`.
fn project_spectrum(values: &[f64], cap: Option<f64>) -> Vec<f64> {
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let cap = match cap {
        Some(c) if clipped.iter().sum::<f64>() > c => c.max(0.0),
        _ => return clipped,
    };
    // Projection onto the simplex {μ ≥ 0, Σμ = cap}.
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        acc += s;
        let candidate = (acc - cap) / (i + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    values.iter().map(|v| (v - theta).max(0.0)).collect()
}

struct Run {
    p: Vec<f64>,
    residual: f64,
    iterations: usize,
}

fn fista(
    m: &RealMatrix,
    y: &[f64],
    layout: &Layout,
    p0: Vec<f64>,
    penalty: f64,
    cap: Option<f64>,
    params: &SolverParams,
) -> Run {
    let diag = layout.c_offset()..layout.c_offset() + layout.n;
    let objective = |p: &[f64]| -> (f64, Vec<f64>) {
        let r: Vec<f64> = m.mul(p).iter().zip(y).map(|(a, b)| a - b).collect();
        let trace: f64 = p[diag.clone()].iter().sum();
        (
            0.5 * r.iter().map(|v| v * v).sum::<f64>() + penalty * trace,
            r,
        )
    };
    let gradient = |r: &[f64]| {
        let mut g = m.mul_t(r);
        for gi in &mut g[diag.clone()] {
            *gi += penalty;
        }
        g
    };

    let lip = m.gram_norm().max(1e-300);
    let mut step = params.step.unwrap_or(1.0 / lip);
    let mut x = p0;
    layout.project(&mut x, cap);
    let (mut fx, rx) = objective(&x);
    let mut residual = norm(&rx);
    let mut z = x.clone();
    let mut theta: f64 = 1.0;
    let mut best = residual;
    let mut best_at = 0;
    let mut iterations = 0;

    while iterations < params.max_iter && residual > params.tol {
        iterations += 1;
        let (fz, rz) = objective(&z);
        let gz = gradient(&rz);
        let mut next;
        loop {
            next = z
                .iter()
                .zip(&gz)
                .map(|(zi, gi)| zi - step * gi)
                .collect::<Vec<f64>>();
            layout.project(&mut next, cap);
            let diff: Vec<f64> = next.iter().zip(&z).map(|(a, b)| a - b).collect();
            let bound = fz
                + diff.iter().zip(&gz).map(|(a, b)| a * b).sum::<f64>()
                + diff.iter().map(|v| v * v).sum::<f64>() / (2.0 * step);
            if objective(&next).0 <= bound + 1e-15 * bound.abs() || step < 1e-12 / lip {
                break;
            }
            step *= 0.5;
        }
        let (fnext, rnext) = objective(&next);
        residual = norm(&rnext);
        if fnext > fx {
            // Restart the momentum from the previous iterate.
            theta = 1.0;
            z = x.clone();
            continue;
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        z = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        x = next;
        fx = fnext;
        theta = theta_next;

        if residual < best - STALL_TOL {
            best = residual;
            best_at = iterations;
        } else if iterations - best_at >= STALL_WINDOW {
            break;
        }
    }
    let residual = norm(&objective(&x).1);
    Run {
        p: x,
        residual,
        iterations,
    }
}

/// Runs the projected-gradient solve and returns its best iterate regardless of
/// the residual reached.
pub fn solve_feasibility(problem: &FeasibilityProblem) -> Result<FeasibilitySolution> {
    problem.validate()?;
    let layout = Layout::new(problem.dim);
    let basis = gellmann_basis(problem.dim);
    let xs: Vec<&CMatrix> = problem.constraints.iter().map(|(x, _)| x).collect();
    let y: Vec<f64> = problem
        .constraints
        .iter()
        .flat_map(|(_, y)| flatten(y))
        .collect();
    let m = layout.design(&xs, &basis);
    let p0 = vec![0.0; layout.len()];
    let mut run = match problem.objective {
        Objective::None => fista(&m, &y, &layout, p0, 0.0, problem.rate_cap, &problem.params),
        Objective::MinTotalRate => {
            let biased = fista(
                &m,
                &y,
                &layout,
                p0,
                RATE_PENALTY,
                problem.rate_cap,
                &problem.params,
            );
            let spent = biased.iterations;
            let mut polish = fista(
                &m,
                &y,
                &layout,
                biased.p,
                0.0,
                problem.rate_cap,
                &problem.params,
            );
            polish.iterations += spent;
            polish
        }
    };
    if !run.residual.is_finite() {
        run.residual = f64::INFINITY;
    }
    Ok(FeasibilitySolution {
        generator: layout.lindbladian(&run.p, &basis),
        residual: run.residual,
        iterations: run.iterations,
    })
}

/// Feasibility solve that fails with `Infeasible` when the final residual
/// exceeds the tolerance. The residual is evidence, not a certificate.
pub fn feasibility_lift(problem: &FeasibilityProblem) -> Result<FeasibilitySolution> {
    let sol = solve_feasibility(problem)?;
    if sol.residual > problem.params.tol {
        return Err(Error::Infeasible {
            t: None,
            residual: sol.residual,
        });
    }
    Ok(sol)
}

#[derive(Clone, Debug)]
pub struct Membership {
    pub member: bool,
    pub witness: Option<Lindbladian>,
    pub residual: Option<f64>,
    /// Kernel compression of `v` is `⪰ −tol`.
    pub necessary_check: bool,
    pub kernel_min_eig: f64,
}

/// Decides `v ∈ T_ρ⁺`. The kernel condition is checked first; then the direct
/// spectral construction is tried, and the feasibility solve decides when it
/// fails.
pub fn tangent_cone_membership(rho: &CMatrix, v: &CMatrix, tol: f64) -> Result<Membership> {
    let kernel_min_eig = kernel_compression_min(rho, v, RANK_TOL);
    if kernel_min_eig < -tol {
        return Ok(Membership {
            member: false,
            witness: None,
            residual: None,
            necessary_check: false,
            kernel_min_eig,
        });
    }
    if let Ok(l) = spectral_generator(rho, v, RANK_TOL, None) {
        let residual = l.apply(rho)?.distance(v);
        if residual <= tol {
            return Ok(Membership {
                member: true,
                witness: Some(l),
                residual: Some(residual),
                necessary_check: true,
                kernel_min_eig,
            });
        }
    }
    let mut problem = FeasibilityProblem::new(rho.rows(), vec![(rho.clone(), v.clone())]);
    problem.params.tol = tol;
    let sol = solve_feasibility(&problem)?;
    let member = sol.residual <= tol;
    Ok(Membership {
        member,
        witness: member.then_some(sol.generator),
        residual: Some(sol.residual),
        necessary_check: true,
        kernel_min_eig,
    })
}

/// Smallest total rate `tr C` of a generator with `‖L(ρ) − v‖ ≤ 1e−8`, by
/// bisection on a cap `tr C ≤ cap` imposed in the solver's projection. The
/// result is accurate to `rel_tol` relative.
pub fn min_dissipation_rate(rho: &CMatrix, v: &CMatrix, rel_tol: f64) -> Result<f64> {
    let kernel_min_eig = kernel_compression_min(rho, v, RANK_TOL);
    if kernel_min_eig < -FEASIBILITY_TOL {
        return Err(Error::NotInTangentCone {
            t: None,
            kernel_min_eig,
        });
    }
    if v.frobenius_norm() == 0.0 {
        return Ok(0.0);
    }
    let feasible = |cap: f64| -> Result<bool> {
        let mut problem = FeasibilityProblem::new(rho.rows(), vec![(rho.clone(), v.clone())]);
        problem.rate_cap = Some(cap);
        Ok(solve_feasibility(&problem)?.residual <= FEASIBILITY_TOL)
    };
    let witness = spectral_generator(rho, v, RANK_TOL, None)?;
    let mut hi = witness.total_rate().max(f64::MIN_POSITIVE);
    let mut grow = 0;
    while !feasible(hi)? {
        hi *= 1.5;
        grow += 1;
        if grow > 60 {
            return Err(Error::Infeasible {
                t: None,
                residual: f64::NAN,
            });
        }
    }
    let mut lo = 0.0;
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
