use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("field length {got} does not match grid with {expected} points")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("density is not resolved by the grid: {0}")]
    Unresolved(String),

    #[error("density reaches {value:e} at the domain boundary (must stay below 1e-12)")]
    BoundaryTruncated { value: f64 },

    #[error("density has a node at index {index}: |psi|^2 = {value:e} below the floor")]
    NodeDetected { index: usize, value: f64 },

    #[error("density support is too narrow ({points} points above the floor)")]
    SupportTooNarrow { points: usize },

    #[error("step {step}: dt = {dt:e} exceeds the stability bound {bound:e}")]
    StabilityViolation { step: usize, dt: f64, bound: f64 },

    #[error("step {step}: caustic forming, max|v'|*dt = {measure:.3} > 0.5")]
    Caustic { step: usize, measure: f64 },

    #[error("step {step}: negative density {value:e} at index {index}")]
    NegativeDensity { step: usize, index: usize, value: f64 },

    #[error("step {step}: density floor breached at index {index}")]
    DensityFloorBreach { step: usize, index: usize },

    #[error("step {step}: normalization drifted by {drift:e} in one step")]
    NormDrift { step: usize, drift: f64 },

    #[error("step {step}: evolution produced non-finite values")]
    Diverged { step: usize },

    #[error("unknown estimator `{0}` (expected mean, median or ml)")]
    UnknownEstimator(String),
}

impl Error {
    /// True for failures raised while integrating in time, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StabilityViolation { .. }
                | Error::Caustic { .. }
                | Error::NegativeDensity { .. }
                | Error::DensityFloorBreach { .. }
                | Error::NormDrift { .. }
                | Error::Diverged { .. }
        )
    }

    /// Step index for errors raised during evolution.
    pub fn step(&self) -> Option<usize> {
        match self {
            Error::StabilityViolation { step, .. }
            | Error::Caustic { step, .. }
            | Error::NegativeDensity { step, .. }
            | Error::DensityFloorBreach { step, .. }
            | Error::NormDrift { step, .. }
            | Error::Diverged { step } => Some(*step),
            _ => None,
        }
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
