use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::family::{EpsilonPolicy, Generator, LiftFamily, PointDiagnostics};
use super::replacer::replacer_lift;
use crate::error::{Error, Result};
use crate::gksl::{Lindbladian, Superoperator, VALIDITY_TOL};
use crate::matcore::{CMatrix, C64};
use crate::paths::Trajectory;

/// Default sampling interval of the reparameterized segment. Beyond about
/// `t = 0.963` the mollifier underflows to zero in double precision.
pub const GEOMETRIC_GRID: (f64, f64) = (0.2, 0.95);

/// `f(t) = e^{1 − 1/(t−1)²}`: `f(0) = 1`, and `f` and all its derivatives
/// vanish as `t → 1`.
pub fn mollifier(t: f64) -> f64 {
    (1.0 - 1.0 / ((t - 1.0) * (t - 1.0))).exp()
}

pub fn mollifier_derivative(t: f64) -> f64 {
    2.0 * mollifier(t) / (t - 1.0).powi(3)
}

/// `f′(t)/(f(t) − 1)`.
pub fn geometric_coefficient(t: f64) -> f64 {
    let f = mollifier(t);
    if f == 0.0 {
        return 0.0;
    }
    mollifier_derivative(t) / (f - 1.0)
}

/// The reparameterized segment `μ_t = (1 − f(t))σ_a + f(t)σ_b`, which starts at
/// `σ_b` and approaches `σ_a` as `t → 1`.
pub fn geometric_path(sigma_a: &CMatrix, sigma_b: &CMatrix) -> Result<Trajectory> {
    let (a, b) = (sigma_a.clone(), sigma_b.clone());
    Trajectory::analytic(
        a.rows(),
        0.0,
        1.0,
        Arc::new(move |t| {
            let f = mollifier(t);
            let mut rho = a.scale(1.0 - f);
            rho.axpy(C64::new(f, 0.0), &b);
            (rho, Some((&b - &a).scale(mollifier_derivative(t))))
        }),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricReport {
    /// `sup_t |f′/(f−1)|` over the grid.
    pub coefficient_sup: f64,
    /// Coefficient at the last grid point.
    pub coefficient_end: f64,
    pub literal_max_residual: f64,
    pub literal_valid_points: usize,
    pub alternative_max_residual: f64,
    pub alternative_all_valid: bool,
}

#[derive(Clone, Debug)]
pub struct GeometricLift {
    pub path: Trajectory,
    pub coefficients: Vec<f64>,
    /// `L_t = (f′/(f−1))(id − R_{σ_b})` along the reparameterized segment.
    pub literal: LiftFamily,
    /// Adaptive replacer lift along the same segment.
    pub alternative: LiftFamily,
    pub report: GeometricReport,
}

/// Geometric lift of the affine segment between `σ_a` and `σ_b` on `grid ⊂ [0, 1)`.
pub fn geometric_lift_affine(
    sigma_a: &CMatrix,
    sigma_b: &CMatrix,
    grid: &[f64],
) -> Result<GeometricLift> {
    if sigma_a.distance(sigma_b) == 0.0 {
        return Err(Error::IdenticalEndpoints);
    }
    if let Some(&t) = grid.iter().find(|&&t| !(0.0..1.0).contains(&t)) {
        return Err(Error::OutOfInterval {
            t,
            t0: 0.0,
            t1: 1.0,
        });
    }
    let path = geometric_path(sigma_a, sigma_b)?;
    let d = sigma_a.rows();
    let base = Superoperator::identity(d).sub(&Superoperator::replacer(sigma_b));
    let mut coefficients = Vec::with_capacity(grid.len());
    let mut generators = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());
    for &t in grid {
        let c = geometric_coefficient(t);
        let (rho, v) = path.sample_with_derivative(t, crate::paths::DEFAULT_H)?;
        let g = Generator::Lindblad(Lindbladian::from_superoperator(
            &base.scale(c),
            VALIDITY_TOL,
        )?);
        diagnostics.push(PointDiagnostics::evaluate(t, &g, &rho, &v)?);
        generators.push(g);
        coefficients.push(c);
    }
    let literal = LiftFamily::new(d, grid.to_vec(), generators, diagnostics)?;
    let alternative = replacer_lift(&path, grid, EpsilonPolicy::Adaptive)?;
    let report = GeometricReport {
        coefficient_sup: coefficients.iter().map(|c| c.abs()).fold(0.0, f64::max),
        coefficient_end: coefficients.last().copied().unwrap_or(0.0),
        literal_max_residual: literal.max_residual(),
        literal_valid_points: literal
            .diagnostics()
            .iter()
            .filter(|d| d.gksl_valid)
            .count(),
        alternative_max_residual: alternative.max_residual(),
        alternative_all_valid: alternative.all_valid(),
    };
    Ok(GeometricLift {
        path,
        coefficients,
        literal,
        alternative,
        report,
    })
}

/// Exponential approach to `σ_b` over `[t_start, t_end]` under the constant
/// generator `κ(R_{σ_b} − id)` with `κ = ln(1/tol)/(t_end − t_start)`. The
/// state moves along the segment from `σ_a` and is within `tol·‖σ_a − σ_b‖`
/// of `σ_b` at `t_end`. Returns the family on `grid` and the realized path.
pub fn exponential_approach_lift(
    sigma_a: &CMatrix,
    sigma_b: &CMatrix,
    t_start: f64,
    t_end: f64,
    grid: &[f64],
    tol: f64,
) -> Result<(LiftFamily, Trajectory)> {
    if !(t_end > t_start) || !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "bad approach segment [{t_start}, {t_end}] with tol {tol}"
        )));
    }
    let kappa = (1.0 / tol).ln() / (t_end - t_start);
    let (a, b) = (sigma_a.clone(), sigma_b.clone());
    let path = Trajectory::analytic(
        a.rows(),
        t_start,
        t_end,
        Arc::new(move |t| {
            let w = (-kappa * (t - t_start)).exp();
            let gap = &a - &b;
            let mut rho = b.clone();
            rho.axpy(C64::new(w, 0.0), &gap);
            (rho, Some(gap.scale(-kappa * w)))
        }),
    )?;
    let g = Generator::Replacer {
        sigma: sigma_b.clone(),
        epsilon: 1.0 / kappa,
    };
    let mut diagnostics = Vec::with_capacity(grid.len());
    for &t in grid {
        let (rho, v) = path.sample_with_derivative(t, crate::paths::DEFAULT_H)?;
        diagnostics.push(PointDiagnostics::evaluate(t, &g, &rho, &v)?);
    }
    let family = LiftFamily::new(
        sigma_a.rows(),
        grid.to_vec(),
        vec![g; grid.len()],
        diagnostics,
    )?;
    Ok((family, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=75).map(|k| 0.2 + k as f64 * 0.01).collect()
    }

    #[test]
    fn coefficient_values() {
        assert!((geometric_coefficient(0.2) - 5.173466535158918).abs() < 1e-12);
        assert!(geometric_coefficient(0.95) < 1e-100);
        assert_eq!(geometric_coefficient(0.99), 0.0);
    }

    #[test]
    fn literal_family_reproduces_but_is_not_gksl() {
        let a = CMatrix::diag(&[1.0, 0.0]);
        let b = CMatrix::diag(&[0.0, 1.0]);
        let lift = geometric_lift_affine(&a, &b, &grid()).unwrap();
        assert!(lift.report.literal_max_residual <= 1e-10);
        assert_eq!(lift.report.literal_valid_points, 0);
        assert!(lift.report.coefficient_sup <= 10.0);
        assert!(lift.report.coefficient_end <= 1e-3);
        assert!(lift.report.alternative_all_valid);
        assert!(lift.report.alternative_max_residual <= 1e-10);
    }

    #[test]
    fn identical_endpoints() {
        let a = CMatrix::diag(&[0.5, 0.5]);
        assert!(matches!(
            geometric_lift_affine(&a, &a, &grid()),
            Err(Error::IdenticalEndpoints)
        ));
    }

    #[test]
    fn exponential_approach_is_exact_on_its_path() {
        let a = CMatrix::diag(&[0.5, 0.5]);
        let b = CMatrix::diag(&[1.0, 0.0]);
        let grid: Vec<f64> = (0..=10).map(|k| 1.0 + k as f64 * 0.1).collect();
        let (fam, path) = exponential_approach_lift(&a, &b, 1.0, 2.0, &grid, 1e-9).unwrap();
        assert!(fam.max_residual() <= 1e-12);
        assert!(fam.all_valid());
        assert!(path.state(2.0).unwrap().distance(&b) <= 1e-9);
    }
}
