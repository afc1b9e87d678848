use thiserror::Error;

/// Errors raised by the library. The CLI maps `is_numerical()` errors to
/// exit code 3 and everything else to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point lies outside the chart domain (coordinate {chart} vanishes)")]
    ChartDomain { chart: usize },

    #[error("fiber coordinate |zeta| = {0:e} is too small for chart evaluation")]
    SingularFiber(f64),

    #[error("point is not inside the unit ball (norm {0})")]
    OutsideBall(f64),

    #[error("operation is undefined at the origin")]
    AtOrigin,

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("almost complex structure degenerates: bound margin {0:e} <= 0")]
    DegenerateStructure(f64),

    #[error("too few samples: N = {samples} cannot resolve K = {modes} modes (need N >= 2K + 2)")]
    Aliasing { samples: usize, modes: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("amplitude {epsilon} exceeds the admissible bound {bound}")]
    AmplitudeTooLarge { epsilon: f64, bound: f64 },

    #[error("no clean kernel: eigenvalue gap ratio {0:e} is below the required 1e3")]
    RankGap(f64),

    #[error("positivity failure: minimal eigenvalue {0:e}")]
    Positivity(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate direction: tangent vector is zero")]
    DegenerateDirection,

    #[error("solver did not converge after {iterations} iterations (boundary penalty {penalty:e})")]
    NonConvergence { iterations: usize, penalty: f64 },

    #[error("indicatrix is not linearly a ball (normalization residual {0:e}); the general normalizing map is not supported")]
    IndicatrixNotBall(f64),

    #[error("expression error at byte {pos}: {msg}")]
    Expr { pos: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of numerical procedures (non-convergence, i/o during
    /// output), as opposed to invalid inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericDomain(_)
                | Error::NonConvergence { .. }
                | Error::DegenerateFit(_)
                | Error::RankGap(_)
                | Error::IndicatrixNotBall(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericDomain(format!("{what} evaluated to {v}")))
    }
}
