use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gksl::{Lindbladian, Superoperator, VALIDITY_TOL};
use crate::matcore::eig::eigh;
use crate::matcore::CMatrix;

/// A generator stored in whichever form it was constructed in.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// `(1/ε)(R_σ − id)`; a GKSL generator exactly when `σ ⪰ 0`.
    Replacer {
        sigma: CMatrix,
        epsilon: f64,
    },
    Lindblad(Lindbladian),
}

impl Generator {
    pub fn zero(dim: usize) -> Self {
        Self::Lindblad(Lindbladian::zero(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Replacer { sigma, .. } => sigma.rows(),
            Self::Lindblad(l) => l.dim(),
        }
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        match self {
            Self::Replacer { sigma, epsilon } => {
                if x.rows() != sigma.rows() || x.cols() != sigma.cols() {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{0}x{0}", sigma.rows()),
                        found: format!("{}x{}", x.rows(), x.cols()),
                    });
                }
                let mut out = sigma.scale_c(x.trace());
                out -= x;
                Ok(out.scale(1.0 / epsilon))
            }
            Self::Lindblad(l) => l.apply(x),
        }
    }

    pub fn to_superoperator(&self) -> Superoperator {
        match self {
            Self::Replacer { sigma, epsilon } => {
                let d = sigma.rows();
                Superoperator::replacer(sigma)
                    .sub(&Superoperator::identity(d))
                    .scale(1.0 / epsilon)
            }
            Self::Lindblad(l) => l.to_superoperator(),
        }
    }

    /// Jump form of a replacer generator: jumps `|u_j⟩⟨k|` with rates `σ_j/ε`
    /// over the eigenpairs `(σ_j, u_j)` of `σ`. Rates are negative when `σ` is.
    pub fn to_lindbladian(&self) -> Lindbladian {
        match self {
            Self::Lindblad(l) => l.clone(),
            Self::Replacer { sigma, epsilon } => {
                let d = sigma.rows();
                let e = eigh(&sigma.hermitian_part());
                let mut ops = Vec::with_capacity(d * d);
                let mut rates = Vec::with_capacity(d * d);
                for (j, &s) in e.values.iter().enumerate() {
                    if s == 0.0 {
                        continue;
                    }
                    let u = e.vector(j);
                    for k in 0..d {
                        let mut a = CMatrix::zeros(d, d);
                        for (i, &ui) in u.iter().enumerate() {
                            a[(i, k)] = ui;
                        }
                        ops.push(a);
                        rates.push(s / epsilon);
                    }
                }
                Lindbladian::with_jumps(&CMatrix::zeros(d, d), ops, rates)
                    .expect("shapes are consistent")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub t: f64,
    pub epsilon: Option<f64>,
    /// `‖L_t(ρ_t) − ρ̇_t‖_F`.
    pub residual: f64,
    pub sigma_min_eig: Option<f64>,
    pub gksl_valid: bool,
    /// Frobenius norm of the generator's superoperator matrix.
    pub gen_norm: f64,
}

impl PointDiagnostics {
    /// Evaluates residual, validity and norm of `generator` at `(ρ, v)`.
    pub fn evaluate(t: f64, generator: &Generator, rho: &CMatrix, v: &CMatrix) -> Result<Self> {
        let s = generator.to_superoperator();
        let residual = generator.apply(rho)?.distance(v);
        let (epsilon, sigma_min_eig) = match generator {
            Generator::Replacer { sigma, epsilon } => (Some(*epsilon), Some(eigh(sigma).min())),
            Generator::Lindblad(_) => (None, None),
        };
        Ok(Self {
            t,
            epsilon,
            residual,
            sigma_min_eig,
            gksl_valid: s.gksl_validity(VALIDITY_TOL).valid,
            gen_norm: s.norm(),
        })
    }
}

/// Generators on a time grid with per-point diagnostics. Times are
/// nondecreasing; a time may appear twice to carry left and right limits at a
/// knot where the family jumps.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftFamily {
    dim: usize,
    times: Vec<f64>,
    generators: Vec<Generator>,
    diagnostics: Vec<PointDiagnostics>,
}

impl LiftFamily {
    pub fn new(
        dim: usize,
        times: Vec<f64>,
        generators: Vec<Generator>,
        diagnostics: Vec<PointDiagnostics>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != generators.len() || times.len() != diagnostics.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} generators and diagnostics", times.len()),
                found: format!(
                    "{} generators, {} diagnostics",
                    generators.len(),
                    diagnostics.len()
                ),
            });
        }
        for (i, w) in times.windows(3).enumerate() {
            if w[0] == w[2] {
                return Err(Error::NonIncreasingTimes { index: i + 2 });
            }
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] >= w[0]) {
                return Err(Error::NonIncreasingTimes { index: i + 1 });
            }
        }
        if let Some(g) = generators.iter().find(|g| g.dim() != dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("dimension {dim}"),
                found: format!("dimension {}", g.dim()),
            });
        }
        Ok(Self {
            dim,
            times,
            generators,
            diagnostics,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn diagnostics(&self) -> &[PointDiagnostics] {
        &self.diagnostics
    }

    pub fn max_residual(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.residual)
            .fold(0.0, f64::max)
    }

    pub fn all_valid(&self) -> bool {
        self.diagnostics.iter().all(|d| d.gksl_valid)
    }

    pub fn superoperators(&self) -> Vec<Superoperator> {
        self.generators
            .iter()
            .map(Generator::to_superoperator)
            .collect()
    }

    /// Appends `other`, dropping its first point if it duplicates the last
    /// point of `self` exactly.
    pub fn concat(mut self, other: LiftFamily) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("dimension {}", self.dim),
                found: format!("dimension {}", other.dim),
            });
        }
        let mut times = std::mem::take(&mut self.times);
        let mut generators = std::mem::take(&mut self.generators);
        let mut diagnostics = std::mem::take(&mut self.diagnostics);
        let skip = usize::from(
            times.last() == other.times.first() && generators.last() == other.generators.first(),
        );
        times.extend(other.times.into_iter().skip(skip));
        generators.extend(other.generators.into_iter().skip(skip));
        diagnostics.extend(other.diagnostics.into_iter().skip(skip));
        Self::new(self.dim, times, generators, diagnostics)
    }

    pub fn into_parts(self) -> (usize, Vec<f64>, Vec<Generator>, Vec<PointDiagnostics>) {
        (self.dim, self.times, self.generators, self.diagnostics)
    }
}

/// Choice of `ε_t` in the replacer lift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonPolicy {
    /// `ε_t = min(1, ½·ε_max(t))`.
    Adaptive,
    /// `ε_t = e^{1 − 1/(1−t)²}`, independent of the path.
    PaperLiteral,
    Constant(f64),
}

impl EpsilonPolicy {
    pub fn literal_epsilon(t: f64) -> f64 {
        (1.0 - 1.0 / ((1.0 - t) * (1.0 - t))).exp()
    }
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        Self::Adaptive
    }
}

impl fmt::Display for EpsilonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Adaptive => write!(f, "adaptive"),
            Self::PaperLiteral => write!(f, "paper"),
            Self::Constant(v) => write!(f, "const:{v}"),
        }
    }
}

impl FromStr for EpsilonPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Self::Adaptive),
            "paper" | "paper_literal" | "paper-literal" => Ok(Self::PaperLiteral),
            _ => {
                let v = s
                    .strip_prefix("const:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidInput(format!("unknown epsilon policy '{s}'")))?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "constant epsilon must be positive, got {v}"
                    )));
                }
                Ok(Self::Constant(v))
            }
        }
    }
}
