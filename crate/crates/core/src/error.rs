use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate point: r = {r:e} is below the frame floor {floor:e}")]
    DegeneratePoint { r: f64, floor: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("point (t = {t}, x = {x:?}) lies outside the sampled domain: {reason}")]
    OutOfDomain { t: f64, x: [f64; 3], reason: String },

    #[error("hyperbolicity lost at t = {t}, x = {x:?} (margin {margin:e})")]
    HyperbolicityLoss { t: f64, x: [f64; 3], margin: f64 },

    #[error("non-finite value in field `{field}` at t = {t}")]
    NonFinite { t: f64, field: &'static str },

    #[error("metric is not invertible at t = {t}, x = {x:?}")]
    MetricInversion { t: f64, x: [f64; 3] },

    #[error("insufficient time levels: need {needed}, have {available}")]
    InsufficientTimeLevels { needed: usize, available: usize },

    #[error("insufficient points for fit: need {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("non-positive value {value:e} at tau = {tau} inside the fit window")]
    NonPositiveValue { tau: f64, value: f64 },

    #[error("adaptive quadrature did not converge on [{a}, {b}] (estimate {estimate:e})")]
    QuadratureFailure { a: f64, b: f64, estimate: f64 },

    #[error("multiplier undefined at r = {r} (requires r >= {min})")]
    MultiplierDomain { r: f64, min: f64 },

    #[error("region is not covered by the trajectory: {0}")]
    RegionOutsideTrajectory(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
