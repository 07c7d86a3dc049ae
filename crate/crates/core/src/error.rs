use thiserror::Error;

pub type Result<T> = std::result::Result<T, FinslerError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FinslerError {
    #[error("derivative order {0} is not supported (maximum is {max})", max = crate::diffcalc::MAX_ORDER)]
    UnsupportedOrder(usize),

    #[error("point {point:?} is outside the domain of {what}")]
    Domain { what: String, point: Vec<f64> },

    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),

    #[error("invalid step {0}: must be positive and finite")]
    InvalidStep(f64),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("metric degeneracy: fundamental tensor has eigenvalue {eigenvalue:e} at x={x:?}, y={y:?}")]
    MetricDegeneracy { eigenvalue: f64, x: Vec<f64>, y: Vec<f64> },

    #[error("degenerate flag: transverse edge is (numerically) parallel to the flagpole")]
    DegenerateFlag,

    #[error("unsupported tensor valence {0}")]
    UnsupportedValence(String),

    #[error("critical point: d rho vanishes at {0:?}")]
    CriticalPoint(Vec<f64>),

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("level {0} has no points inside the domain")]
    EmptyLevel(f64),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("empty path: initial state leaves the domain immediately")]
    EmptyPath,

    #[error("critical-point singularity: rho'(t) = 0 at t = {0}")]
    CriticalPointSingularity(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameter(String),
}
