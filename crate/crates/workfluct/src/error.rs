use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("slot {slot} out of range for a layout with {len} factors")]
    SlotOutOfRange { slot: usize, len: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("unstable drive: lambda = {lambda} must stay below omega/4 = {limit}")]
    UnstableDrive { lambda: f64, limit: f64 },

    #[error("time {t} outside the schedule domain [0, {end}]")]
    OutOfDomain { t: f64, end: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step too large: dt * |H| = {product:.3} exceeds 0.5 (dt = {dt}, |H| = {norm:.3})")]
    StepTooLarge { dt: f64, norm: f64, product: f64 },

    #[error("unitarity drift {drift:.3e} exceeds 1e-6 at t = {t}")]
    UnitarityDrift { drift: f64, t: f64 },

    #[error("guard-level population {population:.3e} exceeds 1e-6 ({context})")]
    GuardLevel { population: f64, context: String },

    #[error("oracle leakage {leakage:.3e} exceeds 1e-6")]
    Leakage { leakage: f64 },

    #[error("characteristic-function sample |L| = {magnitude} exceeds 1")]
    Unbounded { magnitude: f64 },

    #[error("u-grid must be uniform and start at 0: {0}")]
    Grid(String),

    #[error("fluctuation-theorem fit needs at least 5 usable points, found {found}")]
    TooFewPoints { found: usize },

    #[error("phase quadrature failed: {0}")]
    Quadrature(String),

    #[error("run failed at u = {u}: {source}")]
    AtU {
        u: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{} of the u-values failed; first: {}", failures.len(), failures[0])]
    Sweep { failures: Vec<Error> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors raised by the numerical guards rather than by bad input.
    pub fn is_numerical_guard(&self) -> bool {
        match self {
            Error::UnitarityDrift { .. }
            | Error::GuardLevel { .. }
            | Error::Leakage { .. }
            | Error::Unbounded { .. }
            | Error::StepTooLarge { .. }
            | Error::Quadrature(_) => true,
            Error::AtU { source, .. } => source.is_numerical_guard(),
            Error::Sweep { failures } => failures.iter().any(Error::is_numerical_guard),
            _ => false,
        }
    }
}
