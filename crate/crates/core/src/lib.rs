pub mod acs;
pub mod cli;
pub mod error;
pub mod expr;
pub mod generator;
pub mod geometry;
pub mod kobayashi;
pub mod ma_verify;
pub mod numdiff;
pub mod settings;
pub mod spectrum;

pub use error::{Error, Result};
pub use settings::Settings;
