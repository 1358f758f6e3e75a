use thiserror::Error;

use crate::data::DataError;
use crate::inference::InferenceError;
use crate::qreg::FitError;
use crate::simulate::SimulateError;
use crate::treatment::TreatmentError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error. Every variant carries the module that raised it so
/// messages read as `module: detail`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("qreg: {0}")]
    Fit(#[from] FitError),
    #[error("inference: {0}")]
    Inference(#[from] InferenceError),
    #[error("treatment: {0}")]
    Treatment(#[from] TreatmentError),
    #[error("simulate: {0}")]
    Simulate(#[from] SimulateError),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 usage, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Treatment(e) if e.is_data_error() => 3,
            Error::Simulate(SimulateError::InvalidConfig(_)) => 2,
            Error::Simulate(SimulateError::Data(_)) => 3,
            Error::Fit(FitError::InvalidTau(_)) | Error::Fit(FitError::EmptyGrid) => 2,
            Error::Fit(_) | Error::Inference(_) | Error::Treatment(_) | Error::Simulate(_) => 4,
        }
    }
}
