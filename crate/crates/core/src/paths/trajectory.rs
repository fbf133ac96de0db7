use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matcore::{validate_density, CMatrix, DensityMatrix, TangentDirection, C64};

/// Densities sampled from a trajectory must pass validation at this tolerance.
pub const SAMPLE_TOL: f64 = 1e-8;
/// Default finite-difference step.
pub const DEFAULT_H: f64 = 1e-5;

/// `t ↦ (ρ_t, optional ρ̇_t)`.
pub type EvalFn = Arc<dyn Fn(f64) -> (CMatrix, Option<CMatrix>) + Send + Sync>;

#[derive(Clone)]
pub enum Source {
    Analytic(EvalFn),
    /// Sampled states; evaluation between samples is linear.
    Grid {
        times: Vec<f64>,
        states: Vec<CMatrix>,
        derivatives: Option<Vec<CMatrix>>,
    },
    PiecewiseAffine {
        times: Vec<f64>,
        states: Vec<CMatrix>,
    },
}

/// A path of density matrices on `[t0, t1]`. The right end is included for
/// evaluation so that closed sample grids can be queried at their last point.
#[derive(Clone)]
pub struct Trajectory {
    dim: usize,
    t0: f64,
    t1: f64,
    source: Source,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Analytic(_) => "analytic",
            Source::Grid { .. } => "grid",
            Source::PiecewiseAffine { .. } => "piecewise-affine",
        };
        f.debug_struct("Trajectory")
            .field("dim", &self.dim)
            .field("t0", &self.t0)
            .field("t1", &self.t1)
            .field("source", &kind)
            .finish()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidInput(
            "at least two time points are required".into(),
        ));
    }
    for (i, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::NonIncreasingTimes { index: i + 1 });
        }
    }
    Ok(())
}

fn check_states(states: &[CMatrix], dim: usize) -> Result<()> {
    for (index, s) in states.iter().enumerate() {
        if s.rows() != dim || s.cols() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{dim}x{dim}"),
                found: format!("{}x{}", s.rows(), s.cols()),
            });
        }
        let report = validate_density(s, SAMPLE_TOL);
        if !report.is_density {
            return Err(Error::NotADensity {
                index,
                reason: format!(
                    "trace deviation {:.3e}, min eigenvalue {:.3e}",
                    report.trace_dev, report.min_eig
                ),
            });
        }
    }
    Ok(())
}

/// Index `k` with `times[k] <= t <= times[k+1]`.
fn locate(times: &[f64], t: f64) -> usize {
    let k = times.partition_point(|&s| s <= t);
    k.saturating_sub(1).min(times.len() - 2)
}

fn lerp(a: &CMatrix, b: &CMatrix, w: f64) -> CMatrix {
    let mut out = a.scale(1.0 - w);
    out.axpy(C64::new(w, 0.0), b);
    out
}

impl Trajectory {
    pub fn analytic(dim: usize, t0: f64, t1: f64, f: EvalFn) -> Result<Self> {
        if !(t1 > t0) || t0.is_nan() {
            return Err(Error::InvalidInput(format!("empty interval [{t0}, {t1}]")));
        }
        Ok(Self {
            dim,
            t0,
            t1,
            source: Source::Analytic(f),
        })
    }

    pub fn from_grid(
        times: Vec<f64>,
        states: Vec<CMatrix>,
        derivatives: Option<Vec<CMatrix>>,
    ) -> Result<Self> {
        check_times(&times)?;
        if states.len() != times.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} states", times.len()),
                found: format!("{} states", states.len()),
            });
        }
        let dim = states[0].rows();
        check_states(&states, dim)?;
        if let Some(ds) = &derivatives {
            if ds.len() != times.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} derivatives", times.len()),
                    found: format!("{} derivatives", ds.len()),
                });
            }
        }
        let (t0, t1) = (times[0], times[times.len() - 1]);
        Ok(Self {
            dim,
            t0,
            t1,
            source: Source::Grid {
                times,
                states,
                derivatives,
            },
        })
    }

    /// Piecewise-affine interpolation through `states` at `times`.
    pub fn piecewise_affine(states: Vec<CMatrix>, times: Vec<f64>) -> Result<Self> {
        if states.len() != times.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} states", times.len()),
                found: format!("{} states", states.len()),
            });
        }
        check_times(&times)?;
        let dim = states[0].rows();
        check_states(&states, dim)?;
        let (t0, t1) = (times[0], times[times.len() - 1]);
        Ok(Self {
            dim,
            t0,
            t1,
            source: Source::PiecewiseAffine { times, states },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// Knot or sample times for discrete sources.
    pub fn times(&self) -> Option<&[f64]> {
        match &self.source {
            Source::Analytic(_) => None,
            Source::Grid { times, .. } | Source::PiecewiseAffine { times, .. } => Some(times),
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < self.t0 || t > self.t1 {
            return Err(Error::OutOfInterval {
                t,
                t0: self.t0,
                t1: self.t1,
            });
        }
        Ok(())
    }

    fn raw(&self, t: f64) -> (CMatrix, Option<CMatrix>) {
        match &self.source {
            Source::Analytic(f) => f(t),
            Source::Grid {
                times,
                states,
                derivatives,
            } => {
                let k = locate(times, t);
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                let d = derivatives.as_ref().map(|ds| lerp(&ds[k], &ds[k + 1], w));
                (lerp(&states[k], &states[k + 1], w), d)
            }
            Source::PiecewiseAffine { times, states } => {
                let k = locate(times, t);
                let dt = times[k + 1] - times[k];
                let w = (t - times[k]) / dt;
                let state = if w == 0.0 {
                    states[k].clone()
                } else if w == 1.0 {
                    states[k + 1].clone()
                } else {
                    lerp(&states[k], &states[k + 1], w)
                };
                (state, Some((&states[k + 1] - &states[k]).scale(1.0 / dt)))
            }
        }
    }

    /// `ρ_t`, validated as a density at [`SAMPLE_TOL`].
    pub fn state(&self, t: f64) -> Result<DensityMatrix> {
        self.check_t(t)?;
        let (rho, _) = self.raw(t);
        DensityMatrix::with_tol(rho.hermitian_part(), SAMPLE_TOL).map_err(|e| match e {
            Error::InvalidDensity(reason) => Error::InvalidDensity(format!("at t = {t}: {reason}")),
            other => other,
        })
    }

    fn state_matrix(&self, t: f64) -> CMatrix {
        self.raw(t).0
    }

    /// `(ρ_t, ρ̇_t)`. The exact derivative is used when the source supplies one;
    /// sampled grids without derivatives use the three-point stencil on their
    /// own nodes, and everything else falls back to finite differences with
    /// step `h` (one-sided second-order stencils at the interval ends). The
    /// derivative is always Hermitized and trace-projected.
    pub fn sample_with_derivative(
        &self,
        t: f64,
        h: f64,
    ) -> Result<(DensityMatrix, TangentDirection)> {
        let rho = self.state(t)?;
        let (_, exact) = self.raw(t);
        let v = match exact {
            Some(d) => d,
            None => match &self.source {
                Source::Grid { times, states, .. } => grid_derivative(times, states, t),
                _ => self.finite_difference(t, h)?,
            },
        };
        Ok((rho, TangentDirection::project(&v)))
    }

    fn finite_difference(&self, t: f64, h: f64) -> Result<CMatrix> {
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "finite-difference step must be positive, got {h}"
            )));
        }
        let h = h.min((self.t1 - self.t0) / 4.0);
        let f = |s: f64| self.state_matrix(s);
        let d = if t - h >= self.t0 && t + h <= self.t1 {
            (&f(t + h) - &f(t - h)).scale(0.5 / h)
        } else if t - h < self.t0 {
            let mut d = f(t).scale(-3.0);
            d.axpy(C64::new(4.0, 0.0), &f(t + h));
            d.axpy(C64::new(-1.0, 0.0), &f(t + 2.0 * h));
            d.scale(0.5 / h)
        } else {
            let mut d = f(t).scale(3.0);
            d.axpy(C64::new(-4.0, 0.0), &f(t - h));
            d.axpy(C64::new(1.0, 0.0), &f(t - 2.0 * h));
            d.scale(0.5 / h)
        };
        Ok(d)
    }
}

/// Second-order derivative on a nonuniform grid: the three-point stencil at
/// nodes, linear interpolation of the nodal values in between.
fn grid_derivative(times: &[f64], states: &[CMatrix], t: f64) -> CMatrix {
    let n = times.len();
    let node = |i: usize| -> CMatrix {
        let (a, b, c) = if i == 0 {
            (0, 1, 2.min(n - 1))
        } else if i == n - 1 {
            (n.saturating_sub(3), n - 2, n - 1)
        } else {
            (i - 1, i, i + 1)
        };
        if a == b || b == c || n < 3 {
            return (&states[1] - &states[0]).scale(1.0 / (times[1] - times[0]));
        }
        // Derivative at times[i] of the quadratic through nodes a, b, c.
        let (ta, tb, tc, x) = (times[a], times[b], times[c], times[i]);
        let wa = (2.0 * x - tb - tc) / ((ta - tb) * (ta - tc));
        let wb = (2.0 * x - ta - tc) / ((tb - ta) * (tb - tc));
        let wc = (2.0 * x - ta - tb) / ((tc - ta) * (tc - tb));
        let mut d = states[a].scale(wa);
        d.axpy(C64::new(wb, 0.0), &states[b]);
        d.axpy(C64::new(wc, 0.0), &states[c]);
        d
    };
    let k = locate(times, t);
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    if w == 0.0 {
        node(k)
    } else if w == 1.0 {
        node(k + 1)
    } else {
        lerp(&node(k), &node(k + 1), w)
    }
}
