use thiserror::Error;

use crate::context::SceneType;

/// Errors raised by the synthesis, rendering and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient planes: {0}")]
    InsufficientPlanes(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("pose lies outside the room: {0}")]
    OutOfRoom(String),
    #[error("observation for face {found} does not match profile face {expected}")]
    FaceMismatch { expected: usize, found: usize },
    #[error("material `{0}` missing from the absorption library")]
    UnknownMaterial(String),
    #[error("parameter table is missing scene type `{0}`")]
    IncompleteTable(SceneType),
    #[error("calibration grid has no values for `{0}`")]
    EmptyGrid(&'static str),
    #[error("calibration dataset has no entries for scene type `{0}`")]
    EmptyDataset(SceneType),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("source lies outside the room")]
    SourceOutsideRoom,
    #[error("image-source order {0} exceeds the configured cap of {max}", max = crate::synthesis::MAX_ISM_ORDER)]
    OrderTooHigh(usize),
    #[error("invalid length: {0}")]
    InvalidLength(String),
    #[error("block size mismatch: expected {expected}, got {found}")]
    BlockSizeMismatch { expected: usize, found: usize },
    #[error("sample rate mismatch: engine runs at {expected} Hz, got {found} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("sample rate {0} Hz is too low for the 8 kHz octave band")]
    RateTooLow(f64),
    #[error("signal has zero energy")]
    ZeroEnergy,
    #[error("no valid estimate/ground-truth pairs")]
    NoValidPairs,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("impulse-response update queue is full")]
    QueueFull,
}

pub type Result<T> = std::result::Result<T, Error>;
