use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (‖M − M†‖_F = {deviation:.3e})")]
    NonHermitianInput { deviation: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("not a density matrix: {0}")]
    InvalidDensity(String),

    #[error("not a density matrix at index {index}: {reason}")]
    NotADensity { index: usize, reason: String },

    #[error("times must be strictly increasing (violation at index {index})")]
    NonIncreasingTimes { index: usize },

    #[error("t = {t} outside trajectory interval [{t0}, {t1}]")]
    OutOfInterval { t: f64, t0: f64, t1: f64 },

    #[error("dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("Kossakowski matrix has eigenvalue {min_eig:.3e}; not a GKSL generator")]
    NegativeKossakowski { min_eig: f64 },

    #[error("superoperator is not of GKSL form: {0}")]
    NotAGenerator(String),

    #[error("velocity not in tangent cone{}: kernel compression eigenvalue {kernel_min_eig:.3e}", at(*t))]
    NotInTangentCone { t: Option<f64>, kernel_min_eig: f64 },

    #[error("lift residual {residual:.3e} exceeds bound{}", at(*t))]
    ResidualTooLarge { t: Option<f64>, residual: f64 },

    #[error("infeasible{}: final residual {residual:.3e}", at(*t))]
    Infeasible { t: Option<f64>, residual: f64 },

    #[error("rank-shift windows overlap or leave the grid: {0}")]
    WindowTooWide(String),

    #[error("segment endpoints are identical")]
    IdenticalEndpoints,

    #[error("integration grid does not match the generator family: {0}")]
    GridMismatch(String),

    #[error("range error: {0}")]
    RangeError(String),

    #[error("parameter bound violated: {0}")]
    ParameterBound(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at(t: Option<f64>) -> String {
    t.map(|t| format!(" at t = {t}")).unwrap_or_default()
}
