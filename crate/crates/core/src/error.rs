use thiserror::Error;

/// Every failure the toolkit reports. Variants are named after the condition
/// that triggered them so that callers (and the CLI manifest) can surface them
/// verbatim.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown registry key `{0}`")]
    UnknownKey(String),

    #[error("kernel is not integrable against |z|^2 ∧ 1 at x = {x:?}: {reason}")]
    NonIntegrableKernel { x: Vec<f64>, reason: String },

    #[error("symmetry violation: max |k(x,z) - k(x,-z)| = {residual:e} exceeds {tolerance:e}")]
    SymmetryViolation { residual: f64, tolerance: f64 },

    #[error("quadrature did not converge: refinement changed the value by {change:e} (tolerance {tolerance:e})")]
    QuadratureNotConverged { change: f64, tolerance: f64 },

    #[error("tail integral diverges: fitted radial exponent {exponent:.4} is not below -1")]
    DivergentTail { exponent: f64 },

    #[error("singular integral not resolved: excised tail contributions do not shrink ({detail})")]
    SingularityNotResolved { detail: String },

    #[error("transform evaluated at the origin")]
    EvaluationAtOrigin,

    #[error("grid too coarse: {interior} interior nodes (need at least {required})")]
    GridTooCoarse { interior: usize, required: usize },

    #[error("thinning envelope violated: pi(x,z) = {intensity:e} > envelope {envelope:e} at |z| = {radius:e}")]
    EnvelopeViolated { intensity: f64, envelope: f64, radius: f64 },

    #[error("state overflow: |X| = {norm:e} at t = {time}")]
    StateOverflow { norm: f64, time: f64 },

    #[error("sets A and B are not disjoint")]
    DisjointnessViolated,

    #[error("{truncated} of {total} paths reached the horizon before exit")]
    TruncationDominant { truncated: usize, total: usize },

    #[error("harmonic estimate at {point:?} is not bounded away from zero (mean {mean:e}, stderr {stderr:e})")]
    DegenerateHarmonic { point: Vec<f64>, mean: f64, stderr: f64 },

    #[error("power-law fit rejected: R^2 = {r_squared:.4}")]
    FitRejected { r_squared: f64 },

    #[error("no stabilization: last doubling changed the estimate by {relative_change:.3} (relative)")]
    NoStabilization { relative_change: f64 },

    #[error("Lyapunov function tail violates the integrability precondition (exponent {exponent:.4})")]
    TailDivergent { exponent: f64 },

    #[error("return chain is not regenerating: {failures} return legs exceeded the horizon")]
    ChainNotRegenerating { failures: usize },

    #[error("binning too coarse: halving bin width moved TV from {coarse:.4} to {fine:.4}")]
    BinningTooCoarse { coarse: f64, fine: f64 },

    #[error("singular linear system")]
    SingularSystem,

    #[error("residual too large: {residual:e} (relative)")]
    ResidualTooLarge { residual: f64 },

    #[error("discrete comparison violated: min u = {min_value:e} for nonnegative data")]
    ComparisonViolated { min_value: f64 },
}

impl Error {
    /// Short, stable identifier used in manifests and JSON records.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::UnknownKey(_) => "UnknownKey",
            Error::NonIntegrableKernel { .. } => "NonIntegrableKernel",
            Error::SymmetryViolation { .. } => "SymmetryViolation",
            Error::QuadratureNotConverged { .. } => "QuadratureNotConverged",
            Error::DivergentTail { .. } => "DivergentTail",
            Error::SingularityNotResolved { .. } => "SingularityNotResolved",
            Error::EvaluationAtOrigin => "EvaluationAtOrigin",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::EnvelopeViolated { .. } => "EnvelopeViolated",
            Error::StateOverflow { .. } => "StateOverflow",
            Error::DisjointnessViolated => "DisjointnessViolated",
            Error::TruncationDominant { .. } => "TruncationDominant",
            Error::DegenerateHarmonic { .. } => "DegenerateHarmonic",
            Error::FitRejected { .. } => "FitRejected",
            Error::NoStabilization { .. } => "NoStabilization",
            Error::TailDivergent { .. } => "TailDivergent",
            Error::ChainNotRegenerating { .. } => "ChainNotRegenerating",
            Error::BinningTooCoarse { .. } => "BinningTooCoarse",
            Error::SingularSystem => "SingularSystem",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::ComparisonViolated { .. } => "ComparisonViolated",
        }
    }

    /// Validation-type failures (bad input) as opposed to estimator failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::UnknownKey(_)
                | Error::NonIntegrableKernel { .. }
                | Error::SymmetryViolation { .. }
                | Error::DisjointnessViolated
                | Error::EvaluationAtOrigin
                | Error::GridTooCoarse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
