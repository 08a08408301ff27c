use std::path::Path;

use thiserror::Error;

/// Failures reported by the command-line front end. Each maps to a stable
/// category name printed on the single error line.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    InvalidScene(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("input `{path}` is {found} Hz but the engine runs at {expected} Hz")]
    RateMismatch { path: String, expected: u32, found: u32 },
    #[error("record {index} at t={found} precedes t={previous}")]
    StreamOrder { index: usize, previous: f64, found: f64 },
    #[error("{0}")]
    MissingPair(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Core(#[from] roomsynth_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: err.to_string() }
    }

    pub fn category(&self) -> &'static str {
        use roomsynth_core::Error as E;
        match self {
            CliError::Parse(_) => "ParseError",
            CliError::InvalidScene(_) => "InvalidScene",
            CliError::InvalidArgument(_) => "InvalidArgument",
            CliError::RateMismatch { .. } => "RateMismatch",
            CliError::StreamOrder { .. } => "StreamOrderError",
            CliError::MissingPair(_) => "MissingPair",
            CliError::Io { .. } => "IoError",
            CliError::Core(e) => match e {
                E::InsufficientPlanes(_) => "InsufficientPlanes",
                E::DegenerateInput(_) => "DegenerateInput",
                E::OutOfRoom(_) => "OutOfRoom",
                E::FaceMismatch { .. } => "FaceMismatch",
                E::UnknownMaterial(_) => "UnknownMaterial",
                E::IncompleteTable(_) => "IncompleteTable",
                E::EmptyGrid(_) => "EmptyGrid",
                E::EmptyDataset(_) => "EmptyDataset",
                E::InvalidGeometry(_) => "InvalidGeometry",
                E::SourceOutsideRoom => "SourceOutsideRoom",
                E::OrderTooHigh(_) => "OrderTooHigh",
                E::InvalidLength(_) => "InvalidLength",
                E::BlockSizeMismatch { .. } => "BlockSizeMismatch",
                E::RateMismatch { .. } => "RateMismatch",
                E::RateTooLow(_) => "RateTooLow",
                E::ZeroEnergy => "ZeroEnergy",
                E::NoValidPairs => "NoValidPairs",
                E::InvalidConfig(_) => "InvalidConfig",
                E::Parse(_) => "ParseError",
                E::QueueFull => "QueueFull",
            },
        }
    }

    /// `error: <Category>: <message>` on one line.
    pub fn line(&self) -> String {
        let message = self.to_string().replace(['\n', '\r'], " ");
        format!("error: {}: {}", self.category(), message)
    }
}
