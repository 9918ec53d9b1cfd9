use alloc::string::String;

use crate::pool::AdmissibilityReport;
use crate::reward::GrowthReport;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("reserve must be positive, got {0}")]
    NonPositiveReserve(f64),
    #[error("pool reserve {reserve} falls below the floor {floor} at t = {t}")]
    FloorViolation { t: f64, reserve: f64, floor: f64 },
    #[error("control set is not admissible: {0}")]
    Admissibility(AdmissibilityReport),
    #[error("cost model violates the growth bound: {0}")]
    GrowthBound(GrowthReport),
    #[error("explicit scheme is unstable: CFL number {number} > 1")]
    Cfl { number: f64 },
    #[error("Markov chain is inconsistent: {number} > 1")]
    ChainConsistency { number: f64 },
    #[error("non-finite value at t = {t}, x = {x}")]
    NonFinite { t: f64, x: f64 },
    #[error("drift-to-noise ratio {ratio} exceeds the cap {cap}")]
    DriftCap { ratio: f64, cap: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("flow iterate rejected {rejections} times for breaking the reserve floor")]
    IterateRejected { rejections: usize },
}

/// Coarse error taxonomy, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Admissibility,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::EmptySample => ErrorKind::Config,
            Error::Admissibility(_)
            | Error::GrowthBound(_)
            | Error::FloorViolation { .. }
            | Error::DriftCap { .. }
            | Error::IterateRejected { .. } => ErrorKind::Admissibility,
            Error::NonPositiveReserve(_)
            | Error::Cfl { .. }
            | Error::ChainConsistency { .. }
            | Error::NonFinite { .. } => ErrorKind::Numerical,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
