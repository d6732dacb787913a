use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    GeometryInvalid(String),
    #[error("routing failed: {0}")]
    RoutingFailed(String),
    #[error("point ({re}, {im}) is outside the domain")]
    OutOfDomain { re: f64, im: f64 },
    #[error("quadrature did not converge (last change {change:e})")]
    QuadratureNotConverged { change: f64 },
    #[error("underdetermined fit: {0}")]
    Underdetermined(String),
    #[error("ill-conditioned constraint system (condition {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("bump support out of range: {0}")]
    SupportOutOfRange(String),
    #[error("H/eta has poles: {0}")]
    DivisorMismatch(String),
    #[error("exponent overflow: |Re h| reached {max_re:e}")]
    Overflow { max_re: f64 },
    #[error("nullity violated (residual {residual:e})")]
    NullityViolated { residual: f64 },
    #[error("gauss map undefined at a branch point")]
    UndefinedAtBranch,
    #[error("degenerate curve {curve}: max |det| = {max_det:e}")]
    DegenerateCurve { curve: usize, max_det: f64 },
    #[error("spray jacobian condition {condition:e} exceeds bound")]
    Conditioning { condition: f64 },
    #[error("linear independence repair failed: {0}")]
    RepairFailed(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        trace: Vec<f64>,
    },
    #[error("length budget infeasible: achieved {achieved}, required {required}")]
    BudgetInfeasible { achieved: f64, required: f64 },
    #[error("target set unreachable from source")]
    Disconnected,
    #[error("H is identically zero")]
    HIdenticallyZero,
    #[error("no critical-point-free harmonic interpolant found")]
    NoCriticalPointFreeH,
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("stage {stage}: {source}")]
    Stage { stage: String, source: Box<Error> },
}

impl Error {
    /// Stable upper-case code used in reports and CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::GeometryInvalid(_) => "GEOMETRY_INVALID",
            Error::RoutingFailed(_) => "ROUTING_FAILED",
            Error::OutOfDomain { .. } => "OUT_OF_DOMAIN",
            Error::QuadratureNotConverged { .. } => "QUADRATURE_NOT_CONVERGED",
            Error::Underdetermined(_) => "UNDERDETERMINED",
            Error::IllConditioned { .. } => "ILL_CONDITIONED",
            Error::SupportOutOfRange(_) => "SUPPORT_OUT_OF_RANGE",
            Error::DivisorMismatch(_) => "DIVISOR_MISMATCH",
            Error::Overflow { .. } => "OVERFLOW",
            Error::NullityViolated { .. } => "NULLITY_VIOLATED",
            Error::UndefinedAtBranch => "UNDEFINED_AT_BRANCH",
            Error::DegenerateCurve { .. } => "DEGENERATE_CURVE",
            Error::Conditioning { .. } => "CONDITIONING",
            Error::RepairFailed(_) => "REPAIR_FAILED",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::BudgetInfeasible { .. } => "BUDGET_INFEASIBLE",
            Error::Disconnected => "DISCONNECTED",
            Error::HIdenticallyZero => "H_IDENTICALLY_ZERO",
            Error::NoCriticalPointFreeH => "NO_CRITICAL_POINT_FREE_H",
            Error::DegenerateMesh(_) => "DEGENERATE_MESH",
            Error::Unsupported(_) => "UNSUPPORTED",
            Error::Config(_) => "CONFIG_INVALID",
            Error::Io(_) => "IO",
            Error::Stage { source, .. } => source.code(),
        }
    }

    /// Wraps the error with a stage tag.
    pub fn at_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost stage tag, if any.
    pub fn stage(&self) -> Option<String> {
        match self {
            Error::Stage { stage, source } => match source.stage() {
                Some(inner) => Some(format!("{stage}/{inner}")),
                None => Some(stage.clone()),
            },
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub trait StageExt<T> {
    fn stage(self, tag: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, tag: &str) -> Result<T> {
        self.map_err(|e| e.at_stage(tag))
    }
}
