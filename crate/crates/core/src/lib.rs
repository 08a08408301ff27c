pub mod bands;
pub mod context;
pub mod error;
pub mod geometry;
pub mod material;
pub mod metrics;
pub mod render;
pub mod synthesis;

pub use error::{Error, Result};
