//! File formats and command implementations behind the `itst` binary.

pub mod checkpoint;
pub mod commands;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod tensor_file;

pub use error::{CliError, Result};
